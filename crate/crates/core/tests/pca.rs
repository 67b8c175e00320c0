mod common;

use cauchy_pca::linalg::{angle_degrees, classical_first_pc};
use cauchy_pca::mle::{fit_cauchy, ProjectedSample};
use cauchy_pca::pca::{
    fixed_point_update, gaussian_pca_equivalence_check, profile_objective, EQUIVALENCE_GRID_DEG,
};
use cauchy_pca::{fit_cauchy_pca, CauchyPcaConfig, DataMatrix, InitMode, UnitDirection};
use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

#[test]
fn update_matches_direct_evaluation() {
    let mut r = rng(15);
    let x = DataMatrix::new(normal_matrix(&mut r, 15, 3)).unwrap();
    let u = UnitDirection::new(random_unit(&mut r, 3)).unwrap();
    let params =
        fit_cauchy(&ProjectedSample::new(x.project(&u).as_slice().to_vec()).unwrap()).unwrap();
    let got = fixed_point_update(&x, &u, params).unwrap();
    let raw = direct_update(x.values(), u.as_vector(), params.mu, params.sigma);
    let expected = canonical(&(&raw / raw.norm()));
    assert!((got.as_vector() - expected).amax() <= 1e-12);
}

#[test]
fn clean_gaussian_close_to_classical() {
    let mut r = rng(200);
    let x = scaled_gaussian(&mut r, 200, &[3.0, 1.5, 1.0, 0.7, 0.5]);
    let fit = fit_cauchy_pca(&x, &CauchyPcaConfig::new(1)).unwrap();
    let (pc, _) = classical_first_pc(&x).unwrap();
    let angle = angle_degrees(&fit.directions[0], &pc);
    assert!(angle <= 10.0, "angle {angle}");
}

#[test]
fn sequential_components_are_orthogonal() {
    let mut r = rng(21);
    let x = scaled_gaussian(&mut r, 60, &[4.0, 2.0, 1.0, 0.5]);
    let fit = fit_cauchy_pca(&x, &CauchyPcaConfig::new(4)).unwrap();
    for i in 0..4 {
        for j in 0..i {
            assert!(fit.directions[i].dot(&fit.directions[j]).abs() <= 1e-8);
        }
    }
}

#[test]
fn converged_direction_is_a_fixed_point() {
    let mut r = rng(8);
    for _ in 0..5 {
        let x = scaled_gaussian(&mut r, 40, &[2.5, 1.0, 0.6]);
        let cfg = CauchyPcaConfig::new(1);
        let fit = fit_cauchy_pca(&x, &cfg).unwrap();
        assert!(fit.converged[0]);
        let next = fixed_point_update(&x, &fit.directions[0], fit.params[0]).unwrap();
        assert!(angle_degrees(&next, &fit.directions[0]) <= cfg.outer_tol_deg);
    }
}

#[test]
fn profile_objective_is_minimal_against_random_directions() {
    let mut r = rng(50);
    for _ in 0..10 {
        let x = scaled_gaussian(&mut r, 40, &[2.0, 1.0, 0.5]);
        let fit = fit_cauchy_pca(&x, &CauchyPcaConfig::new(1)).unwrap();
        let at_fit = profile_objective(&x, &fit.directions[0]).unwrap();
        for _ in 0..50 {
            let u = UnitDirection::new(random_unit(&mut r, 3)).unwrap();
            let other = profile_objective(&x, &u).unwrap();
            assert!(at_fit <= other + 1e-6, "{at_fit} > {other}");
        }
    }
}

#[test]
fn equivalence_on_random_2d() {
    let mut r = rng(2);
    for _ in 0..20 {
        let a = normal_matrix(&mut r, 30, 2);
        let x = DataMatrix::new(a * random_rotation(&mut r, 2)).unwrap();
        let (vals, _) = jacobi_eigen(&explicit_covariance(x.values()));
        if vals[0] - vals[1] <= 1e-3 {
            continue;
        }
        let check = gaussian_pca_equivalence_check(&x).unwrap();
        assert!(check.angle_deg <= EQUIVALENCE_GRID_DEG, "{check:?}");
    }
}

#[test]
fn rank_one_cli_example_recovers_axis() {
    let x = DataMatrix::from_rows(&[
        vec![1.0, 0.0],
        vec![-1.0, 0.0],
        vec![2.0, 0.0],
        vec![-2.0, 0.0],
    ])
    .unwrap();
    let fit = fit_cauchy_pca(&x, &CauchyPcaConfig::new(1)).unwrap();
    assert!(angle_degrees(&fit.directions[0], &UnitDirection::axis(2, 0)) <= 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rotation_equivariance(seed in 0u64..100_000) {
        let mut r = rng(seed);
        let x = scaled_gaussian(&mut r, 30, &[3.0, 1.2, 0.5]);
        let rot = random_rotation(&mut r, 3);
        let cfg = CauchyPcaConfig::new(1).with_init(InitMode::ClassicalPc);
        let base = fit_cauchy_pca(&x, &cfg).unwrap();
        let turned = fit_cauchy_pca(&DataMatrix::new(x.values() * &rot).unwrap(), &cfg).unwrap();
        prop_assume!(base.converged[0] && turned.converged[0]);
        let expected: DVector<f64> = rot.transpose() * base.directions[0].as_vector();
        let angle = angle_deg(turned.directions[0].as_vector(), &expected);
        prop_assert!(angle <= 1e-4, "angle {angle}");
    }

    #[test]
    fn components_orthogonal_for_any_data(seed in 0u64..100_000, k in 1usize..=3) {
        let mut r = rng(seed);
        let x = DataMatrix::new(normal_matrix(&mut r, 25, 3) * DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0, 0.5]))).unwrap();
        let fit = fit_cauchy_pca(&x, &CauchyPcaConfig::new(k)).unwrap();
        for i in 0..k {
            prop_assert!((fit.directions[i].as_vector().norm() - 1.0).abs() <= 1e-12);
            for j in 0..i {
                prop_assert!(fit.directions[i].dot(&fit.directions[j]).abs() <= 1e-8);
            }
        }
    }
}
