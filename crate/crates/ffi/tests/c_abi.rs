use std::ffi::CStr;
use std::ptr;

use cauchy_pca_ffi::*;

fn sample() -> Vec<f64> {
    // Points spread along (1, 1) with small orthogonal noise.
    let mut v = Vec::new();
    for i in 0..40 {
        let t = (i as f64 - 19.5) * 0.3;
        let e = ((i * 7 % 11) as f64 - 5.0) * 0.02;
        v.push(t + e);
        v.push(t - e);
    }
    v
}

unsafe fn last_error() -> String {
    let p = cpca_last_error_message();
    assert!(!p.is_null());
    CStr::from_ptr(p).to_string_lossy().into_owned()
}

#[test]
fn fit_round_trip() {
    unsafe {
        let values = sample();
        let mut data = ptr::null_mut();
        assert_eq!(
            cpca_data_new(values.as_ptr(), 40, 2, &mut data),
            CpcaStatus::Ok
        );
        assert_eq!(cpca_data_nrows(data), 40);
        assert_eq!(cpca_data_ncols(data), 2);

        let mut opts = cpca_fit_options_default();
        opts.components = 2;
        let mut fit = ptr::null_mut();
        assert_eq!(cpca_fit(data, &opts, &mut fit), CpcaStatus::Ok);
        assert_eq!(cpca_fit_components(fit), 2);
        assert_eq!(cpca_fit_dim(fit), 2);

        let mut u = [0.0; 2];
        assert_eq!(
            cpca_fit_direction(fit, 0, u.as_mut_ptr(), 2),
            CpcaStatus::Ok
        );
        let diag = [std::f64::consts::FRAC_1_SQRT_2; 2];
        let mut angle = f64::NAN;
        assert_eq!(
            cpca_angle_degrees(u.as_ptr(), diag.as_ptr(), 2, &mut angle),
            CpcaStatus::Ok
        );
        assert!(angle < 5.0, "angle {angle}");

        let (mut mu, mut sigma, mut conv) = (f64::NAN, f64::NAN, false);
        assert_eq!(
            cpca_fit_params(fit, 0, &mut mu, &mut sigma, &mut conv),
            CpcaStatus::Ok
        );
        assert!(sigma > 0.0 && mu.is_finite());
        assert!(conv);

        assert_eq!(
            cpca_fit_direction(fit, 2, u.as_mut_ptr(), 2),
            CpcaStatus::InvalidInput
        );
        assert!(last_error().contains("out of range"));
        assert_eq!(
            cpca_fit_direction(fit, 0, u.as_mut_ptr(), 1),
            CpcaStatus::InvalidInput
        );

        cpca_fit_free(fit);
        cpca_data_free(data);
    }
}

#[test]
fn null_options_use_defaults() {
    unsafe {
        let values = sample();
        let mut data = ptr::null_mut();
        assert_eq!(
            cpca_data_new(values.as_ptr(), 40, 2, &mut data),
            CpcaStatus::Ok
        );
        let mut fit = ptr::null_mut();
        assert_eq!(cpca_fit(data, ptr::null(), &mut fit), CpcaStatus::Ok);
        assert_eq!(cpca_fit_components(fit), 1);
        cpca_fit_free(fit);
        cpca_data_free(data);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut data = ptr::null_mut();
        let bad = [1.0, f64::NAN, 2.0, 3.0];
        assert_eq!(
            cpca_data_new(bad.as_ptr(), 2, 2, &mut data),
            CpcaStatus::InvalidInput
        );
        assert!(data.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(
            cpca_data_new(ptr::null(), 2, 2, &mut data),
            CpcaStatus::NullPointer
        );
        assert!(last_error().contains("values"));

        let values = sample();
        assert_eq!(
            cpca_data_new(values.as_ptr(), 40, 2, &mut data),
            CpcaStatus::Ok
        );
        let mut opts = cpca_fit_options_default();
        opts.components = 3;
        let mut fit = ptr::null_mut();
        assert_eq!(cpca_fit(data, &opts, &mut fit), CpcaStatus::InvalidInput);
        assert!(fit.is_null());
        cpca_data_free(data);

        let constant = [2.0; 20];
        assert_eq!(
            cpca_data_new(constant.as_ptr(), 10, 2, &mut data),
            CpcaStatus::Ok
        );
        assert_eq!(cpca_fit(data, ptr::null(), &mut fit), CpcaStatus::ZeroScale);
        cpca_data_free(data);

        let zero = [0.0; 2];
        let one = [1.0, 0.0];
        let mut angle = 0.0;
        assert_eq!(
            cpca_angle_degrees(zero.as_ptr(), one.as_ptr(), 2, &mut angle),
            CpcaStatus::InvalidInput
        );

        cpca_data_free(ptr::null_mut());
        cpca_fit_free(ptr::null_mut());
    }
}

#[test]
fn classical_influence_matches_closed_form() {
    // Diagonal covariance: IF_u(z) = -(z1 z2)/(l2 - l1) e2 for z about the mean.
    unsafe {
        let values = [3.0, 0.0, -3.0, 0.0, 0.0, 1.0, 0.0, -1.0];
        let mut data = ptr::null_mut();
        assert_eq!(
            cpca_data_new(values.as_ptr(), 4, 2, &mut data),
            CpcaStatus::Ok
        );
        let z = [1.0, 2.0];
        let mut out = [f64::NAN; 2];
        let mut singular = true;
        assert_eq!(
            cpca_influence(data, z.as_ptr(), false, out.as_mut_ptr(), 2, &mut singular),
            CpcaStatus::Ok
        );
        assert!(!singular);
        // Covariance with 1/n: l1 = 4.5, l2 = 0.5.
        let expected: f64 = -(1.0 * 2.0) / (0.5 - 4.5);
        assert!(out[0].abs() < 1e-12);
        assert!((out[1].abs() - expected.abs()).abs() < 1e-10, "{out:?}");
        cpca_data_free(data);
    }
}

#[test]
fn cauchy_influence_is_finite() {
    unsafe {
        let values = sample();
        let mut data = ptr::null_mut();
        assert_eq!(
            cpca_data_new(values.as_ptr(), 40, 2, &mut data),
            CpcaStatus::Ok
        );
        let z = [3.0, -2.0];
        let mut out = [f64::NAN; 2];
        let status = cpca_influence(data, z.as_ptr(), true, out.as_mut_ptr(), 2, ptr::null_mut());
        assert_eq!(status, CpcaStatus::Ok);
        assert!(out.iter().all(|v| v.is_finite()));
        cpca_data_free(data);
    }
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(cpca_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api() {
    let header = include_str!("../include/cauchy_pca.h");
    for name in [
        "cpca_data_new",
        "cpca_fit",
        "cpca_fit_direction",
        "cpca_influence",
        "cpca_last_error_message",
        "CPCA_STATUS_SINGULAR_A",
        "typedef struct CpcaFit CpcaFit",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
