mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use slicedict::pursuit::{kkt_residual, lasso_objective};
use slicedict::{gram, init_dictionary, lasso_solve, Needle, PursuitConfig};

fn tight(lambda: f64) -> PursuitConfig {
    PursuitConfig {
        lambda,
        max_sweeps: 10_000,
        tolerance: 1e-9,
        max_nonzeros: None,
    }
}

#[test]
fn matches_sign_pattern_enumeration() {
    let mut rng = rng(10);
    for trial in 0..30 {
        let d = init_dictionary(9, 4, trial);
        let g = gram(&d);
        let b: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lambda = rng.random_range(0.01..0.5);
        let sol = lasso_solve(&d, &g, &b, &tight(lambda), None).unwrap();
        assert!(sol.converged);
        let got = lasso_objective(&d, &b, &sol.needle, lambda);
        let expect = enumeration_oracle(&d, &b, lambda);
        assert!((got - expect).abs() < 1e-8, "trial {trial}: {got} vs {expect}");
    }
}

#[test]
fn kkt_and_objective_bounds_with_default_tolerance() {
    let mut rng = rng(11);
    for trial in 0..100 {
        let m = rng.random_range(1..12);
        let d = init_dictionary(16, m, 100 + trial);
        let g = gram(&d);
        let b: Vec<f64> = (0..16).map(|_| rng.random_range(-2.0..2.0)).collect();
        let lambda = rng.random_range(0.0..1.0);
        let cfg = PursuitConfig {
            lambda,
            max_sweeps: 10_000,
            ..Default::default()
        };
        let sol = lasso_solve(&d, &g, &b, &cfg, None).unwrap();
        assert!(sol.converged);
        assert!(kkt_residual(&d, &b, &sol.needle, lambda) <= 1e-6);
        let half_energy = 0.5 * b.iter().map(|v| v * v).sum::<f64>();
        assert!(lasso_objective(&d, &b, &sol.needle, lambda) <= half_energy + 1e-15);
    }
}

#[test]
fn zero_weight_matches_least_squares() {
    let mut rng = rng(12);
    for trial in 0..10 {
        let d = init_dictionary(12, 5, 200 + trial);
        let g = gram(&d);
        let b: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sol = lasso_solve(&d, &g, &b, &tight(0.0), None).unwrap();
        let dm = DMatrix::from_column_slice(12, 5, d.as_slice());
        let ls = (dm.transpose() * &dm)
            .cholesky()
            .unwrap()
            .solve(&(dm.transpose() * DVector::from_column_slice(&b)));
        assert!(max_abs_diff(&sol.needle.to_dense(5), ls.as_slice()) < 1e-8);
    }
}

#[test]
fn objective_non_increasing_across_sweeps() {
    let mut rng = rng(13);
    for trial in 0..10 {
        let d = init_dictionary(9, 6, 300 + trial);
        let g = gram(&d);
        let b: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lambda = 0.05;
        let warm = Needle::from_dense(&(0..6).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>());
        let mut prev = lasso_objective(&d, &b, &warm, lambda);
        for sweeps in 1..30 {
            let cfg = PursuitConfig {
                lambda,
                max_sweeps: sweeps,
                tolerance: 1e-14,
                max_nonzeros: None,
            };
            let sol = lasso_solve(&d, &g, &b, &cfg, Some(&warm)).unwrap();
            let obj = lasso_objective(&d, &b, &sol.needle, lambda);
            assert!(obj <= prev + 1e-14);
            prev = obj;
        }
    }
}
