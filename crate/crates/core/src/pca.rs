//! Cauchy PCA: alternate a Cauchy maximum-likelihood fit on the projected
//! data with a fixed-point update of the direction, then deflate and repeat
//! for the next component.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{
    angle_between, classical_first_pc, deflate, spatial_sign_pc, DataMatrix, UnitDirection,
};
use crate::mle::{fit_cauchy_weighted, initial_params, weighted_loglik, CauchyParams};
use crate::pp::pp_first_pc;

/// Default outer stopping rule: angle change between iterates, in degrees.
pub const DEFAULT_OUTER_TOL_DEG: f64 = 1e-6;
pub const DEFAULT_MAX_OUTER_ITERS: usize = 500;

/// How each component's iteration is started.
#[derive(Debug, Clone, PartialEq)]
pub enum InitMode {
    /// Runs the iteration from the classical PC, the spatial-sign PC and the
    /// projection-pursuit (MAD index) direction of the working data, and
    /// keeps the fit with the smallest profile objective.
    MultiStart,
    /// Classical first PC of the (deflated) data; falls back to a seeded
    /// random direction when that PC is not identifiable.
    ClassicalPc,
    /// Seeded random unit direction.
    Random { seed: u64 },
    /// Caller-supplied start for each component, in order.
    Provided(Vec<UnitDirection>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CauchyPcaConfig {
    pub k: usize,
    pub outer_tol_deg: f64,
    pub max_outer_iters: usize,
    pub init: InitMode,
}

impl CauchyPcaConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            outer_tol_deg: DEFAULT_OUTER_TOL_DEG,
            max_outer_iters: DEFAULT_MAX_OUTER_ITERS,
            init: InitMode::MultiStart,
        }
    }

    pub fn with_tolerance(mut self, outer_tol_deg: f64, max_outer_iters: usize) -> Self {
        self.outer_tol_deg = outer_tol_deg;
        self.max_outer_iters = max_outer_iters;
        self
    }

    pub fn with_init(mut self, init: InitMode) -> Self {
        self.init = init;
        self
    }

    fn validate(&self, p: usize) -> Result<()> {
        if self.k == 0 || self.k > p {
            return Err(Error::invalid(format!(
                "component count must be in 1..={p}, got {}",
                self.k
            )));
        }
        if self.outer_tol_deg.is_nan() || self.outer_tol_deg <= 0.0 {
            return Err(Error::invalid("outer tolerance must be positive"));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::invalid("max_outer_iters must be positive"));
        }
        if let InitMode::Provided(dirs) = &self.init {
            if dirs.len() < self.k {
                return Err(Error::invalid(format!(
                    "{} start directions provided for {} components",
                    dirs.len(),
                    self.k
                )));
            }
            if let Some(d) = dirs.iter().find(|d| d.dim() != p) {
                return Err(Error::invalid(format!(
                    "start direction has dimension {}, data has {p}",
                    d.dim()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CauchyPcaResult {
    pub directions: Vec<UnitDirection>,
    pub params: Vec<CauchyParams>,
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
}

/// One fixed-point step: `u_un = sum_i (c_i - mu) x_i / (sigma^2 + (c_i - mu)^2)`
/// with `c_i = x_i^T u`, normalised.
pub fn fixed_point_update(
    x: &DataMatrix,
    u: &UnitDirection,
    params: CauchyParams,
) -> Result<UnitDirection> {
    let raw = unnormalized_update(x.values(), u.as_vector(), params, None)?;
    UnitDirection::new(raw)
}

pub(crate) fn unnormalized_update(
    x: &DMatrix<f64>,
    u: &DVector<f64>,
    params: CauchyParams,
    w: Option<&[f64]>,
) -> Result<DVector<f64>> {
    let c = x * u;
    let s2 = params.sigma * params.sigma;
    let mut scale = 0.0;
    let coef = DVector::from_fn(c.len(), |i, _| {
        let d = c[i] - params.mu;
        let wi = w.map_or(1.0, |w| w[i]) * d / (s2 + d * d);
        scale += wi.abs() * x.row(i).norm();
        wi
    });
    let raw = x.transpose() * coef;
    let norm = raw.norm();
    if !norm.is_finite() || norm <= 1e-14 * scale {
        return Err(Error::ZeroUpdate(norm));
    }
    Ok(raw)
}

/// Outcome of the alternating iteration for one component.
#[derive(Debug, Clone)]
pub(crate) struct LeadingFit {
    pub direction: DVector<f64>,
    pub params: CauchyParams,
    pub iterations: usize,
    pub converged: bool,
}

/// Alternating scheme for a single direction. `previous` are directions the
/// iterate is kept orthogonal to.
pub(crate) fn fit_leading(
    x: &DMatrix<f64>,
    w: Option<&[f64]>,
    start: DVector<f64>,
    previous: &[DVector<f64>],
    tol_deg: f64,
    max_iters: usize,
) -> Result<LeadingFit> {
    let mut u = reproject(start, previous)?;
    let mut params = None;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iters {
        iterations += 1;
        let fit = fit_projection(x, &u, w, params)?;
        let raw = unnormalized_update(x, &u, fit, w)?;
        let mut next = reproject(raw, previous)?;
        if next.dot(&u) < 0.0 {
            next.neg_mut();
        }
        let change = angle_between(&u, &next);
        u = next;
        params = Some(fit);
        if change <= tol_deg {
            converged = true;
            break;
        }
    }
    let params = fit_projection(x, &u, w, params)?;
    Ok(LeadingFit {
        direction: u,
        params,
        iterations,
        converged,
    })
}

/// Cauchy MLE of `x u`, warm-started from the previous fit when available.
fn fit_projection(
    x: &DMatrix<f64>,
    u: &DVector<f64>,
    w: Option<&[f64]>,
    warm: Option<CauchyParams>,
) -> Result<CauchyParams> {
    let c = x * u;
    let c = c.as_slice();
    let init = match warm {
        Some(prev) => prev,
        None => initial_params(c)?,
    };
    match fit_cauchy_weighted(c, w, init) {
        Ok(p) => Ok(p),
        // a warm start can be far off after a large direction change
        Err(Error::FailedConvergence { .. }) if warm.is_some() => {
            fit_cauchy_weighted(c, w, initial_params(c)?)
        }
        Err(e) => Err(e),
    }
}

fn reproject(mut v: DVector<f64>, previous: &[DVector<f64>]) -> Result<DVector<f64>> {
    for q in previous {
        let d = q.dot(&v);
        v -= q * d;
    }
    let norm = v.norm();
    if !norm.is_finite() || norm <= 0.0 {
        return Err(Error::ZeroUpdate(norm));
    }
    Ok(v / norm)
}

fn random_unit(seed: u64, p: usize) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
    v.normalize()
}

/// Fits `cfg.k` Cauchy principal directions sequentially with deflation.
///
/// The data are used as given; centre and scale them beforehand (see
/// [`crate::prep`]).
pub fn fit_cauchy_pca(x: &DataMatrix, cfg: &CauchyPcaConfig) -> Result<CauchyPcaResult> {
    if x.nrows() < 3 {
        return Err(Error::invalid("Cauchy PCA needs at least 3 samples"));
    }
    cfg.validate(x.ncols())?;

    let mut work = x.clone();
    let mut result = CauchyPcaResult {
        directions: Vec::with_capacity(cfg.k),
        params: Vec::with_capacity(cfg.k),
        iterations: Vec::with_capacity(cfg.k),
        converged: Vec::with_capacity(cfg.k),
    };
    let mut previous: Vec<DVector<f64>> = Vec::with_capacity(cfg.k);

    for j in 0..cfg.k {
        let starts = match &cfg.init {
            InitMode::MultiStart => multi_starts(&work, j),
            InitMode::ClassicalPc => vec![match classical_first_pc(&work) {
                Ok((u, _)) => u.into_vector(),
                Err(_) => random_unit(0x5eed ^ j as u64, x.ncols()),
            }],
            InitMode::Random { seed } => vec![random_unit(seed.wrapping_add(j as u64), x.ncols())],
            InitMode::Provided(dirs) => vec![dirs[j].as_vector().clone()],
        };
        let fit = best_fit(&work, starts, &previous, cfg).map_err(|e| e.in_component(j))?;
        let dir = UnitDirection::new(fit.direction.clone()).map_err(|e| e.in_component(j))?;
        work = deflate(&work, &dir);
        previous.push(fit.direction);
        result.directions.push(dir);
        result.params.push(fit.params);
        result.iterations.push(fit.iterations);
        result.converged.push(fit.converged);
    }
    Ok(result)
}

/// Start directions for [`InitMode::MultiStart`]; a seeded random direction
/// stands in when none of the three is available.
fn multi_starts(work: &DataMatrix, j: usize) -> Vec<DVector<f64>> {
    let mut starts = Vec::with_capacity(3);
    if let Ok((u, _)) = classical_first_pc(work) {
        starts.push(u.into_vector());
    }
    if let Ok(u) = spatial_sign_pc(work) {
        starts.push(u.into_vector());
    }
    if let Ok(u) = pp_first_pc(work) {
        starts.push(u.into_vector());
    }
    if starts.is_empty() {
        starts.push(random_unit(0x5eed ^ j as u64, work.ncols()));
    }
    starts
}

/// Fits from every start and keeps the smallest profile objective (the
/// earliest start on ties). Fails only when every start fails.
fn best_fit(
    work: &DataMatrix,
    starts: Vec<DVector<f64>>,
    previous: &[DVector<f64>],
    cfg: &CauchyPcaConfig,
) -> Result<LeadingFit> {
    let single = starts.len() == 1;
    let mut best: Option<(f64, LeadingFit)> = None;
    let mut first_err = None;
    for start in starts {
        let fit = match fit_leading(
            work.values(),
            None,
            start,
            previous,
            cfg.outer_tol_deg,
            cfg.max_outer_iters,
        ) {
            Ok(f) => f,
            Err(e) => {
                first_err.get_or_insert(e);
                continue;
            }
        };
        if single {
            return Ok(fit);
        }
        let c = work.values() * &fit.direction;
        let objective = weighted_loglik(fit.params, c.as_slice(), None);
        if best.as_ref().is_none_or(|(b, _)| objective < *b) {
            best = Some((objective, fit));
        }
    }
    match best {
        Some((_, fit)) => Ok(fit),
        None => Err(first_err.expect("at least one start was tried")),
    }
}

/// Profile objective `l_C(theta_hat(u) | c(u))`, the quantity Cauchy PCA
/// minimises over unit `u`.
pub fn profile_objective(x: &DataMatrix, u: &UnitDirection) -> Result<f64> {
    let c = x.project(u);
    let params = fit_projection(x.values(), u.as_vector(), None, None)?;
    Ok(weighted_loglik(params, c.as_slice(), None))
}

/// Gaussian profile log-likelihood `-n/2 log s2(u) - n/2`, where `s2(u)` is
/// the `1/n` variance of the projections.
pub fn gaussian_profile_loglik(x: &DataMatrix, u: &DVector<f64>) -> f64 {
    let n = x.nrows() as f64;
    let var = projected_variance(x, u);
    -0.5 * n * var.ln() - 0.5 * n
}

fn projected_variance(x: &DataMatrix, u: &DVector<f64>) -> f64 {
    let c = x.values() * u;
    let mean = c.mean();
    c.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c.len() as f64
}

/// Result of comparing the Gaussian-likelihood argmin with the classical PC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceCheck {
    /// Angle between the grid argmin and the covariance argmax (NaN when
    /// degenerate).
    pub angle_deg: f64,
    /// `s2(grid argmin) / s2(classical pc)`.
    pub variance_ratio: f64,
    /// The leading eigenvalue is tied, so the argmax is not unique.
    pub degenerate: bool,
}

/// Grid resolution of the equivalence check, in degrees.
pub const EQUIVALENCE_GRID_DEG: f64 = 0.5;

/// Minimises the Gaussian profile log-likelihood over a grid of unit
/// directions (p <= 3) and compares the minimiser with the classical first PC.
pub fn gaussian_pca_equivalence_check(x: &DataMatrix) -> Result<EquivalenceCheck> {
    let p = x.ncols();
    if p > 3 {
        return Err(Error::UnsupportedDimension(p));
    }
    let grid = direction_grid(p, EQUIVALENCE_GRID_DEG);
    let best = grid
        .into_iter()
        .map(|u| (gaussian_profile_loglik(x, &u), u))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, u)| u)
        .expect("grid is never empty");

    match classical_first_pc(x) {
        Ok((pc, _)) => Ok(EquivalenceCheck {
            angle_deg: angle_between(&best, pc.as_vector()),
            variance_ratio: projected_variance(x, &best) / projected_variance(x, pc.as_vector()),
            degenerate: false,
        }),
        Err(Error::FailedConvergence { .. }) => Ok(EquivalenceCheck {
            angle_deg: f64::NAN,
            variance_ratio: 1.0,
            degenerate: true,
        }),
        Err(e) => Err(e),
    }
}

/// Unit directions on a half-circle (p = 2) or hemisphere (p = 3) grid.
fn direction_grid(p: usize, step_deg: f64) -> Vec<DVector<f64>> {
    match p {
        1 => vec![DVector::from_element(1, 1.0)],
        2 => {
            let steps = (180.0 / step_deg).round() as usize;
            (0..steps)
                .map(|i| {
                    let t = (i as f64 * step_deg).to_radians();
                    DVector::from_vec(vec![t.cos(), t.sin()])
                })
                .collect()
        }
        _ => {
            let polar_steps = (90.0 / step_deg).round() as usize;
            let azimuth_steps = (360.0 / step_deg).round() as usize;
            let mut out = vec![DVector::from_vec(vec![0.0, 0.0, 1.0])];
            for i in 1..=polar_steps {
                let theta = (i as f64 * step_deg).to_radians();
                for k in 0..azimuth_steps {
                    let phi = (k as f64 * step_deg).to_radians();
                    out.push(DVector::from_vec(vec![
                        theta.sin() * phi.cos(),
                        theta.sin() * phi.sin(),
                        theta.cos(),
                    ]));
                }
            }
            out
        }
    }
}
