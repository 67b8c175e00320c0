//! C ABI over `cauchy-pca`.
//!
//! Data and fits are opaque handles created and freed through this API.
//! Every fallible call returns a [`CpcaStatus`]; on failure the message is
//! available from [`cpca_last_error_message`] on the same thread until the
//! next failing call. Matrices are passed row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cauchy_pca::influence::{cauchy_if, classical_if};
use cauchy_pca::linalg::angle_degrees;
use cauchy_pca::prep::{preprocess, CenteringMode, CenteringSpec, ScaleMode};
use cauchy_pca::{
    fit_cauchy_pca, CauchyParams, CauchyPcaConfig, DataMatrix, Error, ErrorCode, UnitDirection,
};
use nalgebra::{DMatrix, DVector};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpcaStatus {
    Ok = 0,
    InvalidInput = 1,
    FailedConvergence = 2,
    ZeroVariance = 3,
    Multiplicity = 4,
    DegenerateSample = 5,
    ZeroUpdate = 6,
    UnsupportedDimension = 7,
    SingularA = 8,
    SingularFisher = 9,
    ZeroScale = 10,
    TooManyFailures = 11,
    NullPointer = 100,
    Panic = 101,
}

impl From<ErrorCode> for CpcaStatus {
    fn from(code: ErrorCode) -> Self {
        match code {
            ErrorCode::InvalidInput => CpcaStatus::InvalidInput,
            ErrorCode::FailedConvergence => CpcaStatus::FailedConvergence,
            ErrorCode::ZeroVariance => CpcaStatus::ZeroVariance,
            ErrorCode::Multiplicity => CpcaStatus::Multiplicity,
            ErrorCode::DegenerateSample => CpcaStatus::DegenerateSample,
            ErrorCode::ZeroUpdate => CpcaStatus::ZeroUpdate,
            ErrorCode::UnsupportedDimension => CpcaStatus::UnsupportedDimension,
            ErrorCode::SingularA => CpcaStatus::SingularA,
            ErrorCode::SingularFisher => CpcaStatus::SingularFisher,
            ErrorCode::ZeroScale => CpcaStatus::ZeroScale,
            ErrorCode::TooManyFailures => CpcaStatus::TooManyFailures,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpcaCentering {
    ColumnMedian = 0,
    SpatialMedian = 1,
    None = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpcaScale {
    MedianAbsDeviation = 0,
    MeanAbsAboutMedian = 1,
    MeanAbsAboutMean = 2,
    None = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpcaFitOptions {
    pub components: usize,
    pub centering: CpcaCentering,
    pub scale: CpcaScale,
    pub outer_tol_deg: f64,
    pub max_outer_iters: usize,
}

/// An n x p data matrix.
pub struct CpcaData {
    inner: DataMatrix,
}

/// Result of a Cauchy PCA fit.
pub struct CpcaFit {
    dim: usize,
    directions: Vec<UnitDirection>,
    params: Vec<CauchyParams>,
    converged: Vec<bool>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(err: Error) -> CpcaStatus {
    let status = err.code().into();
    set_error(err.to_string());
    status
}

fn null_arg(name: &str) -> CpcaStatus {
    set_error(format!("null pointer passed for {name}"));
    CpcaStatus::NullPointer
}

fn guard<F: FnOnce() -> CpcaStatus>(f: F) -> CpcaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic".into());
            CpcaStatus::Panic
        }
    }
}

/// Message for the last failing call on this thread, or null if none. The
/// pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn cpca_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cpca_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn cpca_fit_options_default() -> CpcaFitOptions {
    let cfg = CauchyPcaConfig::new(1);
    CpcaFitOptions {
        components: 1,
        centering: CpcaCentering::ColumnMedian,
        scale: CpcaScale::MedianAbsDeviation,
        outer_tol_deg: cfg.outer_tol_deg,
        max_outer_iters: cfg.max_outer_iters,
    }
}

/// Copies `nrows * ncols` row-major values into a new data handle.
///
/// # Safety
/// `values` must point to `nrows * ncols` readable doubles and `out` must be
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cpca_data_new(
    values: *const f64,
    nrows: usize,
    ncols: usize,
    out: *mut *mut CpcaData,
) -> CpcaStatus {
    guard(|| {
        if out.is_null() {
            return null_arg("out");
        }
        *out = ptr::null_mut();
        if values.is_null() {
            return null_arg("values");
        }
        let Some(len) = nrows.checked_mul(ncols) else {
            return fail(Error::InvalidInput("matrix size overflows".into()));
        };
        let slice = std::slice::from_raw_parts(values, len);
        match DataMatrix::new(DMatrix::from_row_slice(nrows, ncols, slice)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(CpcaData { inner }));
                CpcaStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `data` must be null or a handle from [`cpca_data_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cpca_data_free(data: *mut CpcaData) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// # Safety
/// `data` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cpca_data_nrows(data: *const CpcaData) -> usize {
    data.as_ref().map_or(0, |d| d.inner.nrows())
}

/// # Safety
/// `data` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cpca_data_ncols(data: *const CpcaData) -> usize {
    data.as_ref().map_or(0, |d| d.inner.ncols())
}

fn centering(c: CpcaCentering) -> CenteringMode {
    match c {
        CpcaCentering::ColumnMedian => CenteringMode::ColumnMedian,
        CpcaCentering::SpatialMedian => CenteringMode::SpatialMedian,
        CpcaCentering::None => CenteringMode::None,
    }
}

fn scale(s: CpcaScale) -> ScaleMode {
    match s {
        CpcaScale::MedianAbsDeviation => ScaleMode::MedianAbsDeviation,
        CpcaScale::MeanAbsAboutMedian => ScaleMode::MeanAbsAboutMedian,
        CpcaScale::MeanAbsAboutMean => ScaleMode::MeanAbsAboutMean,
        CpcaScale::None => ScaleMode::None,
    }
}

/// Preprocesses `data` and fits `options.components` Cauchy directions.
///
/// # Safety
/// `data` must be a live handle, `options` null (defaults) or valid, `out`
/// valid.
#[no_mangle]
pub unsafe extern "C" fn cpca_fit(
    data: *const CpcaData,
    options: *const CpcaFitOptions,
    out: *mut *mut CpcaFit,
) -> CpcaStatus {
    guard(|| {
        if out.is_null() {
            return null_arg("out");
        }
        *out = ptr::null_mut();
        let Some(data) = data.as_ref() else {
            return null_arg("data");
        };
        let opts = options
            .as_ref()
            .copied()
            .unwrap_or_else(|| cpca_fit_options_default());
        let spec = CenteringSpec {
            mode: centering(opts.centering),
            scale: scale(opts.scale),
        };
        let cfg = CauchyPcaConfig::new(opts.components)
            .with_tolerance(opts.outer_tol_deg, opts.max_outer_iters);
        let fitted = preprocess(&data.inner, spec).and_then(|p| fit_cauchy_pca(&p.data, &cfg));
        match fitted {
            Ok(r) => {
                *out = Box::into_raw(Box::new(CpcaFit {
                    dim: data.inner.ncols(),
                    directions: r.directions,
                    params: r.params,
                    converged: r.converged,
                }));
                CpcaStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `fit` must be null or a handle from [`cpca_fit`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cpca_fit_free(fit: *mut CpcaFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// # Safety
/// `fit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cpca_fit_components(fit: *const CpcaFit) -> usize {
    fit.as_ref().map_or(0, |f| f.directions.len())
}

/// # Safety
/// `fit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cpca_fit_dim(fit: *const CpcaFit) -> usize {
    fit.as_ref().map_or(0, |f| f.dim)
}

/// Copies direction `index` into `out`, which must hold `len >= p` doubles.
///
/// # Safety
/// `fit` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cpca_fit_direction(
    fit: *const CpcaFit,
    index: usize,
    out: *mut f64,
    len: usize,
) -> CpcaStatus {
    guard(|| {
        let Some(fit) = fit.as_ref() else {
            return null_arg("fit");
        };
        if out.is_null() {
            return null_arg("out");
        }
        let Some(dir) = fit.directions.get(index) else {
            return fail(Error::InvalidInput(format!(
                "component {index} out of range ({} fitted)",
                fit.directions.len()
            )));
        };
        if len < fit.dim {
            return fail(Error::InvalidInput(format!(
                "buffer holds {len} values, direction has {}",
                fit.dim
            )));
        }
        std::slice::from_raw_parts_mut(out, fit.dim).copy_from_slice(dir.as_slice());
        CpcaStatus::Ok
    })
}

/// Location and scale of the projections onto direction `index`, and
/// whether its iteration converged.
///
/// # Safety
/// `fit` must be a live handle; output pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn cpca_fit_params(
    fit: *const CpcaFit,
    index: usize,
    mu: *mut f64,
    sigma: *mut f64,
    converged: *mut bool,
) -> CpcaStatus {
    guard(|| {
        let Some(fit) = fit.as_ref() else {
            return null_arg("fit");
        };
        let Some(p) = fit.params.get(index) else {
            return fail(Error::InvalidInput(format!(
                "component {index} out of range ({} fitted)",
                fit.params.len()
            )));
        };
        if !mu.is_null() {
            *mu = p.mu;
        }
        if !sigma.is_null() {
            *sigma = p.sigma;
        }
        if !converged.is_null() {
            *converged = fit.converged[index];
        }
        CpcaStatus::Ok
    })
}

unsafe fn unit(v: *const f64, p: usize, name: &str) -> Result<UnitDirection, CpcaStatus> {
    if v.is_null() {
        return Err(null_arg(name));
    }
    UnitDirection::from_slice(std::slice::from_raw_parts(v, p)).map_err(fail)
}

/// Sign-invariant angle in degrees between two length-`p` vectors.
///
/// # Safety
/// `a` and `b` must point to `p` doubles, `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cpca_angle_degrees(
    a: *const f64,
    b: *const f64,
    p: usize,
    out: *mut f64,
) -> CpcaStatus {
    guard(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let (ua, ub) = match (unit(a, p, "a"), unit(b, p, "b")) {
            (Ok(ua), Ok(ub)) => (ua, ub),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        *out = angle_degrees(&ua, &ub);
        CpcaStatus::Ok
    })
}

/// Influence of a point `z` on the leading direction estimated from `data`
/// as given (no preprocessing). `cauchy` selects the Cauchy estimator,
/// otherwise classical PCA. Writes `p` values to `out`. For the Cauchy
/// estimator a near-singular `A` leaves `out` untouched, sets `*singular`
/// and returns `CPCA_STATUS_SINGULAR_A`.
///
/// # Safety
/// `data` must be a live handle, `z` must point to `p` doubles, `out` to
/// `len` writable doubles; `singular` may be null.
#[no_mangle]
pub unsafe extern "C" fn cpca_influence(
    data: *const CpcaData,
    z: *const f64,
    cauchy: bool,
    out: *mut f64,
    len: usize,
    singular: *mut bool,
) -> CpcaStatus {
    guard(|| {
        let Some(data) = data.as_ref() else {
            return null_arg("data");
        };
        if z.is_null() {
            return null_arg("z");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let p = data.inner.ncols();
        if len < p {
            return fail(Error::InvalidInput(format!(
                "buffer holds {len} values, data has {p} columns"
            )));
        }
        let zv = DVector::from_column_slice(std::slice::from_raw_parts(z, p));
        if !singular.is_null() {
            *singular = false;
        }
        let value = if cauchy {
            let fitted = fit_cauchy_pca(&data.inner, &CauchyPcaConfig::new(1))
                .and_then(|r| cauchy_if(&zv, &data.inner, &r.directions[0], r.params[0]));
            match fitted {
                Ok(r) => match r.if_vector {
                    Some(v) => v,
                    None => {
                        if !singular.is_null() {
                            *singular = true;
                        }
                        return fail(Error::SingularA(r.condition));
                    }
                },
                Err(e) => return fail(e),
            }
        } else {
            match classical_if(&zv, &data.inner.covariance()) {
                Ok(r) => r.if_vector,
                Err(e) => return fail(e),
            }
        };
        std::slice::from_raw_parts_mut(out, p).copy_from_slice(value.as_slice());
        CpcaStatus::Ok
    })
}
