//! Property tests for the covariance machinery: the three computation
//! routes agree, the unit-variance solve round-trips, and the three
//! observation-preserving transforms leave the observed block fixed.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use polcm::covariance::{
    covariance_blocks, covariance_full, group_sign_flip, orthogonal_transform,
    rescale_latents, trek_rule_sigma, unit_variance_noise_solve,
};
use polcm::{fixtures, NodeId, NoiseSpec, PolcmGraph, WeightMatrix};

fn random_model_on(
    rng: &mut ChaCha8Rng,
    g: &PolcmGraph,
    coeff_scale: f64,
) -> (WeightMatrix, NoiseSpec) {
    let mut f = WeightMatrix::zeros(g);
    for (p, c) in g.edges().collect::<Vec<_>>() {
        f.set(p, c, rng.gen_range(-coeff_scale..coeff_scale)).unwrap();
    }
    let omega = DVector::from_iterator(
        g.num_nodes(),
        (0..g.num_nodes()).map(|_| rng.gen_range(0.3..2.0)),
    );
    (f, NoiseSpec::new(g.num_latent(), omega).unwrap())
}

fn random_dag(seed: u64, max_nodes: usize, edge_p: f64) -> PolcmGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.gen_range(1..4usize);
    let d = rng.gen_range((m + 2).max(5)..=max_nodes);
    let mut edges = Vec::new();
    for p in 0..d {
        for c in (p + 1)..d {
            if rng.gen_bool(edge_p) {
                edges.push((p, c));
            }
        }
    }
    PolcmGraph::new(m, d - m, edges).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dense_and_block_formulas_agree(seed in 0u64..10_000) {
        let g = random_dag(seed, 12, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
        let (f, omega) = random_model_on(&mut rng, &g, 1.0);
        let full = covariance_full(&f, &omega).unwrap();
        match covariance_blocks(&f, &omega) {
            Ok(blocks) => {
                prop_assert!((&full.sigma_x - &blocks.sigma_x).abs().max() < 1e-10);
                prop_assert!((&full.sigma_l - &blocks.sigma_l).abs().max() < 1e-10);
            }
            // rectangular observed-to-latent block: only the dense route applies
            Err(polcm::PolcmError::UnsupportedShape(_)) => {}
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn trek_rule_matches_dense_formula(seed in 0u64..10_000) {
        let g = random_dag(seed, 9, 0.25);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1111);
        let (f, omega) = random_model_on(&mut rng, &g, 1.0);
        let full = covariance_full(&f, &omega).unwrap();
        let variances = full.sigma_full.diagonal();
        for i in 0..g.num_nodes() {
            for j in i..g.num_nodes() {
                let trek = trek_rule_sigma(&g, &f, &variances, NodeId(i), NodeId(j)).unwrap();
                prop_assert!(
                    (trek - full.sigma_full[(i, j)]).abs() < 1e-9,
                    "entry ({i},{j}): trek {trek} vs dense {}",
                    full.sigma_full[(i, j)]
                );
            }
        }
    }

    #[test]
    fn unit_variance_solve_round_trips(seed in 0u64..10_000) {
        let g = random_dag(seed, 12, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x2222);
        // small coefficients keep unit variances feasible
        let (f, _) = random_model_on(&mut rng, &g, 0.35);
        let omega = unit_variance_noise_solve(&g, &f)
            .unwrap()
            .expect("feasible at this scale");
        let cov = covariance_full(&f, &omega).unwrap();
        for i in 0..g.num_nodes() {
            prop_assert!((cov.sigma_full[(i, i)] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn observed_block_survives_all_three_transforms(seed in 0u64..10_000) {
        let g = fixtures::twin_latents_shared_children();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (f, omega) = random_model_on(&mut rng, &g, 0.6);
        let base = covariance_full(&f, &omega).unwrap().sigma_x;

        let lambda = DVector::from_iterator(2, (0..2).map(|_| {
            let v: f64 = rng.gen_range(0.2..2.0);
            if rng.gen_bool(0.5) { -v } else { v }
        }));
        let (f1, o1) = rescale_latents(&f, &omega, &lambda).unwrap();
        prop_assert!((&base - covariance_full(&f1, &o1).unwrap().sigma_x).abs().max() < 1e-10);

        let subset: BTreeSet<NodeId> = (0..2).filter(|_| rng.gen_bool(0.5)).map(NodeId).collect();
        if !subset.is_empty() {
            let f2 = group_sign_flip(&f, &subset).unwrap();
            prop_assert!((&base - covariance_full(&f2, &omega).unwrap().sigma_x).abs().max() < 1e-10);
        }

        // rotations need the unit-noise scale
        let (fs, _) = random_model_on(&mut rng, &g, 0.35);
        if let Some(ou) = unit_variance_noise_solve(&g, &fs).unwrap() {
            let base_u = covariance_full(&fs, &ou).unwrap().sigma_x;
            let theta: f64 = rng.gen_range(-3.0..3.0);
            let q = DMatrix::from_row_slice(2, 2, &[
                theta.cos(), -theta.sin(),
                theta.sin(), theta.cos(),
            ]);
            let (f3, o3) = orthogonal_transform(&fs, &ou, &q).unwrap();
            prop_assert!((&base_u - covariance_full(&f3, &o3).unwrap().sigma_x).abs().max() < 1e-10);
        }
    }
}
