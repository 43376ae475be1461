//! Behavioural guarantees of the maximum-likelihood estimator beyond unit
//! gradient checks: agreement with ordinary least squares when everything
//! is observed, the likelihood floor shared by rotated truths, closed-form
//! agreement on the smallest latent graph, and restart bookkeeping.

use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, DVector};

use polcm::covariance::{covariance_full, unit_variance_noise_solve, orthogonal_transform};
use polcm::estimator::{estimate, nll, EstimatorConfig, Method};
use polcm::{fixtures, NodeId, PolcmGraph, WeightMatrix};

/// Shrinks a random model on `g` until unit variances are feasible.
fn unit_model(g: &PolcmGraph, seed: u64) -> (WeightMatrix, polcm::NoiseSpec) {
    let (mut f, _) = fixtures::random_model(g, seed);
    loop {
        if let Some(omega) = unit_variance_noise_solve(g, &f).unwrap() {
            return (f, omega);
        }
        let mut mat = f.matrix().clone();
        mat *= 0.8;
        f = WeightMatrix::from_dense(f.num_latent(), mat);
    }
}

#[test]
fn all_observed_chain_recovers_regression_coefficients() {
    // X1 -> X2 -> X3 with no latents: the fit must match the path
    // coefficients of the standardized population model.
    let g = PolcmGraph::new(0, 3, [(0, 1), (1, 2)]).unwrap();
    let (f_true, omega) = unit_model(&g, 4);
    let sigma_x = covariance_full(&f_true, &omega).unwrap().sigma_x;
    let cfg = EstimatorConfig {
        restarts: 6,
        max_iters: 3000,
        ..EstimatorConfig::default()
    };
    let fit = estimate(&g, &sigma_x, 50_000, &cfg).unwrap();
    // OLS of X2 on X1 and of X3 on X2, from the covariance directly
    let b12 = sigma_x[(0, 1)] / sigma_x[(0, 0)];
    let b23 = sigma_x[(1, 2)] / sigma_x[(1, 1)];
    assert_abs_diff_eq!(fit.f_hat.get(NodeId(0), NodeId(1)), b12, epsilon = 1e-4);
    assert_abs_diff_eq!(fit.f_hat.get(NodeId(1), NodeId(2)), b23, epsilon = 1e-4);
}

#[test]
fn rotated_truth_sits_on_the_same_likelihood_floor() {
    let g = fixtures::twin_latents_shared_children();
    let (f, omega) = unit_model(&g, 8);
    let sigma_x = covariance_full(&f, &omega).unwrap().sigma_x;
    let k = 10_000;
    let base = nll(&sigma_x, &sigma_x, k).unwrap();

    let theta: f64 = 1.1;
    let q = DMatrix::from_row_slice(2, 2, &[
        theta.cos(), -theta.sin(),
        theta.sin(), theta.cos(),
    ]);
    let (fr, or) = orthogonal_transform(&f, &omega, &q).unwrap();
    let rotated_sigma = covariance_full(&fr, &or).unwrap().sigma_x;
    let rotated = nll(&rotated_sigma, &sigma_x, k).unwrap();
    assert_abs_diff_eq!(base, rotated, epsilon = 1e-8 * base.abs().max(1.0));
}

#[test]
fn smallest_latent_graph_matches_the_closed_form() {
    let g = fixtures::single_latent_three_children();
    let (f_true, omega) = unit_model(&g, 12);
    let s = covariance_full(&f_true, &omega).unwrap().sigma_x;
    let cfg = EstimatorConfig {
        restarts: 8,
        max_iters: 4000,
        ..EstimatorConfig::default()
    };
    let fit = estimate(&g, &s, 100_000, &cfg).unwrap();

    // the square-root solution, fixed to the positive sign branch
    let f12 = (s[(0, 1)] * s[(0, 2)] / s[(1, 2)]).sqrt();
    let f13 = s[(0, 1)] / f12;
    let f14 = s[(0, 2)] / f12;
    let sign = fit.f_hat.get(NodeId(0), NodeId(1)).signum() * f12.signum();
    for (c, want) in [(1, f12), (2, f13), (3, f14)] {
        let got = fit.f_hat.get(NodeId(0), NodeId(c));
        assert_abs_diff_eq!(got, sign * want, epsilon = 1e-3);
    }
}

#[test]
fn best_restart_is_the_minimum_of_the_recorded_outcomes() {
    let g = fixtures::latent_chain();
    let (f, omega) = unit_model(&g, 21);
    let sigma_x = covariance_full(&f, &omega).unwrap().sigma_x;
    let cfg = EstimatorConfig {
        restarts: 6,
        max_iters: 800,
        ..EstimatorConfig::default()
    };
    let fit = estimate(&g, &sigma_x, 5000, &cfg).unwrap();
    assert_eq!(fit.restarts.len(), 6);
    let best = fit
        .restarts
        .iter()
        .map(|r| r.objective)
        .fold(f64::INFINITY, f64::min);
    assert_abs_diff_eq!(fit.objective, best, epsilon = 0.0);
    let first_best = fit
        .restarts
        .iter()
        .find(|r| r.objective == best)
        .unwrap()
        .restart_index;
    assert_eq!(fit.restart_index, first_best, "ties break to the lowest index");
}

#[test]
fn lm_penalty_drives_latent_variances_to_one() {
    let g = fixtures::latent_chain();
    let (f, omega) = unit_model(&g, 30);
    let sigma_x = covariance_full(&f, &omega).unwrap().sigma_x;
    let cfg = EstimatorConfig {
        method: Method::Lm,
        restarts: 6,
        max_iters: 4000,
        ..EstimatorConfig::default()
    };
    let fit = estimate(&g, &sigma_x, 10_000, &cfg).unwrap();
    let w = polcm::covariance::total_effects(&fit.f_hat).unwrap();
    let full = w.transpose() * DMatrix::from_diagonal(&DVector::from_iterator(
        g.num_nodes(),
        fit.omega_hat.omega().iter().copied(),
    )) * &w;
    for i in 0..g.num_latent() {
        assert!(
            (full[(i, i)] - 1.0).abs() < 0.05,
            "latent {i} variance {}",
            full[(i, i)]
        );
    }
}
