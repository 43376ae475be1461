//! Three routes to the same model covariance: the dense formula, the block
//! formula, and the trek-rule expansion of a single entry.

use polcm::covariance::{covariance_blocks, covariance_full, trek_rule_sigma};
use polcm::fixtures;
use polcm::NodeId;

fn main() -> polcm::Result<()> {
    // The block formula needs no observed-to-latent edges (or a square
    // block of them); the chain qualifies.
    let chain = fixtures::latent_chain();
    let (cf, comega) = fixtures::random_model(&chain, 1);
    let dense = covariance_full(&cf, &comega)?;
    let blocks = covariance_blocks(&cf, &comega)?;
    println!(
        "dense vs block observed covariance, max diff {:.2e}",
        (&dense.sigma_x - &blocks.sigma_x).abs().max()
    );

    let g = fixtures::trek_demo();
    let (f, omega) = fixtures::trek_demo_coefficients(&g);
    let full = covariance_full(&f, &omega)?;
    let variances = full.sigma_full.diagonal();
    let (x4, x5) = (NodeId(3), NodeId(4));
    let trek = trek_rule_sigma(&g, &f, &variances, x4, x5)?;
    println!(
        "sigma(X4, X5): trek rule {:.6}, dense {:.6}",
        trek,
        full.sigma_full[(x4.0, x5.0)]
    );
    Ok(())
}
