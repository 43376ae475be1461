//! The three transformations that leave the observed covariance untouched:
//! latent rescaling, per-latent sign flips, and orthogonal rotation of a
//! latent block.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use polcm::covariance::{
    covariance_full, group_sign_flip, orthogonal_transform, rescale_latents,
    unit_variance_noise_solve,
};
use polcm::fixtures;
use polcm::NodeId;

fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

fn main() -> polcm::Result<()> {
    let g = fixtures::twin_latents_shared_children();
    let (f, omega) = fixtures::random_model(&g, 11);
    let base = covariance_full(&f, &omega)?.sigma_x;

    let lambda = DVector::from_vec(vec![1.7, 0.4]);
    let (f2, o2) = rescale_latents(&f, &omega, &lambda)?;
    println!(
        "rescale latents:      sigma_x drift {:.2e}",
        max_diff(&base, &covariance_full(&f2, &o2)?.sigma_x)
    );

    let flipped = group_sign_flip(&f, &BTreeSet::from([NodeId(0)]))?;
    println!(
        "flip sign of L1:      sigma_x drift {:.2e}",
        max_diff(&base, &covariance_full(&flipped, &omega)?.sigma_x)
    );

    // Rotation needs unit latent noise; shrink the coefficients until unit
    // variances are feasible, then solve for the noise.
    let mut mat = f.matrix().clone();
    mat *= 0.4;
    let f = polcm::WeightMatrix::from_dense(f.num_latent(), mat);
    let omega_unit = unit_variance_noise_solve(&g, &f)?
        .expect("unit variances are feasible for this model");
    let base_unit = covariance_full(&f, &omega_unit)?.sigma_x;
    let theta: f64 = 0.6;
    let q = DMatrix::from_row_slice(2, 2, &[
        theta.cos(), -theta.sin(),
        theta.sin(), theta.cos(),
    ]);
    let (f3, o3) = orthogonal_transform(&f, &omega_unit, &q)?;
    println!(
        "rotate twin latents:  sigma_x drift {:.2e}",
        max_diff(&base_unit, &covariance_full(&f3, &o3)?.sigma_x)
    );
    Ok(())
}
