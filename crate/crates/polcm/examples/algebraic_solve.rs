//! Closed-form coefficient recovery from the exact observed covariance,
//! using the square-root trick for latent loadings and regression for
//! fully observed parent sets.

use polcm::covariance::covariance_full;
use polcm::fixtures;
use polcm::identify::algebraic_identify;
use polcm::metrics::mse_group_sign;

fn main() -> polcm::Result<()> {
    for (name, g) in fixtures::algebraic_fixtures() {
        let (f, _) = fixtures::random_model(&g, 5);
        // The closed form works on the unit-variance scale.
        let omega = polcm::covariance::unit_variance_noise_solve(&g, &scale_down(&f))?
            .expect("scaled model admits unit variances");
        let f = scale_down(&f);
        let sigma_x = covariance_full(&f, &omega)?.sigma_x;

        let result = algebraic_identify(&g, &sigma_x, 1e-9)?;
        let err = mse_group_sign(&f, &result.f_hat)?;
        println!(
            "{name}: solved {} of {} edges, mse (up to sign) {:.2e}",
            result.solved.len(),
            result.solved.len() + result.unsolved.len(),
            err
        );
    }
    Ok(())
}

/// Shrinks coefficients until every node can carry positive noise at unit
/// variance.
fn scale_down(f: &polcm::WeightMatrix) -> polcm::WeightMatrix {
    let mut mat = f.matrix().clone();
    mat *= 0.5;
    polcm::WeightMatrix::from_dense(f.num_latent(), mat)
}
