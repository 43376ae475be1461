//! The two recovery scores. A sign-flipped copy of the truth scores zero
//! under the group-sign metric; a rotated twin-latent block scores zero
//! only under the orthogonal metric.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use polcm::covariance::{group_sign_flip, orthogonal_transform, unit_variance_noise_solve};
use polcm::fixtures;
use polcm::metrics::{mse_group_sign, mse_orthogonal, OrthogonalMetricOptions};
use polcm::NodeId;

fn main() -> polcm::Result<()> {
    let g = fixtures::twin_latents_shared_children();
    let (f, _) = fixtures::random_model(&g, 3);
    let mut mat = f.matrix().clone();
    mat *= 0.4;
    let f = polcm::WeightMatrix::from_dense(f.num_latent(), mat);

    let flipped = group_sign_flip(&f, &BTreeSet::from([NodeId(1)]))?;
    println!("sign flip, mse_gs = {:.2e}", mse_group_sign(&f, &flipped)?);

    let omega = unit_variance_noise_solve(&g, &f)?.expect("feasible");
    let theta: f64 = 0.8;
    let q = DMatrix::from_row_slice(2, 2, &[
        theta.cos(), -theta.sin(),
        theta.sin(), theta.cos(),
    ]);
    let (rotated, _) = orthogonal_transform(&f, &omega, &q)?;
    println!(
        "rotation, mse_gs = {:.2e} but mse_ot = {:.2e}",
        mse_group_sign(&f, &rotated)?,
        mse_orthogonal(&f, &rotated, &OrthogonalMetricOptions::default())?.mse
    );
    Ok(())
}
