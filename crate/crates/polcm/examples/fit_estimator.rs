//! Fits edge coefficients by maximum likelihood with both parameterizations
//! and compares their recovery error on the same sample.

use polcm::bench::standardized_truth;
use polcm::covariance::covariance_full;
use polcm::estimator::{estimate, EstimatorConfig, Method};
use polcm::fixtures;
use polcm::metrics::mse_group_sign;
use polcm::sim::{random_polcm, sample_covariance, simulate, standardize, SimConfig};

fn main() -> polcm::Result<()> {
    let g = fixtures::mixed_clusters();
    let sim = SimConfig {
        sample_size: 10_000,
        seed: 9,
        min_abs_coeff: 0.1,
        ..SimConfig::default()
    };
    let (f, omega) = random_polcm(&g, &sim)?;
    let data = standardize(&simulate(&g, &f, &omega, &sim)?)?;
    let sigma_hat = sample_covariance(&data);
    let k = data.samples.nrows();

    let cov = covariance_full(&f, &omega)?;
    let sds: Vec<f64> = (0..g.num_nodes()).map(|i| cov.sigma_full[(i, i)].sqrt()).collect();
    let truth = standardized_truth(&f, &sds);

    for method in [Method::Tr, Method::Lm] {
        let cfg = EstimatorConfig {
            method,
            restarts: 10,
            max_iters: 2000,
            ..EstimatorConfig::default()
        };
        let fit = estimate(&g, &sigma_hat, k, &cfg)?;
        println!(
            "{:?}: nll {:.1}, best restart {}, mse up to sign {:.2e}",
            method,
            fit.nll,
            fit.restart_index,
            mse_group_sign(&truth, &fit.f_hat)?
        );
    }
    Ok(())
}
