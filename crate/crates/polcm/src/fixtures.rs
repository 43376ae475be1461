//! Built-in benchmark graphs.
//!
//! Each constructor returns a hand-checked [`PolcmGraph`]. The collections
//! at the bottom group them by the recovery guarantee they are meant to
//! exercise: `group_sign_fixtures` are fully identifiable (recovery up to
//! per-latent sign), `orthogonal_fixtures` each contain a latent block that
//! is only determined up to rotation.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::covariance::{NoiseSpec, WeightMatrix};
use crate::graph::PolcmGraph;

/// One latent with three observed children. The smallest graph on which
/// the square-root trick pins down the latent loadings even though no
/// purely graphical certificate exists.
pub fn single_latent_three_children() -> PolcmGraph {
    PolcmGraph::new(1, 3, [(0, 1), (0, 2), (0, 3)]).unwrap()
}

/// Two latents sharing all six observed children. The latent block is a
/// rank-two factor model, determined only up to rotation.
pub fn twin_latents_shared_children() -> PolcmGraph {
    let edges = (2..8).flat_map(|j| [(0, j), (1, j)]);
    PolcmGraph::new(2, 6, edges).unwrap()
}

/// Fifteen-node hierarchy with three latents, observed-to-latent edges and
/// an atomic cover `{L1, X6}` mixing a latent with an observed node.
///
/// Structure: L3 anchors pure children X13..X15 and drives X4, X5; X4 and
/// X5 feed L1, L2 and X6; `{L1, X6}` shares children X9, X10; `{L1, L2}`
/// share children X11, X12; L2 alone drives X7, X8.
pub fn three_latent_hierarchy() -> PolcmGraph {
    PolcmGraph::new(
        3,
        12,
        [
            (2, 12),
            (2, 13),
            (2, 14),
            (2, 3),
            (2, 4),
            (3, 0),
            (4, 0),
            (3, 1),
            (4, 1),
            (3, 5),
            (4, 5),
            (0, 8),
            (0, 9),
            (5, 8),
            (5, 9),
            (0, 10),
            (0, 11),
            (1, 10),
            (1, 11),
            (1, 6),
            (1, 7),
        ],
    )
    .unwrap()
}

/// Seven nodes: a latent L1 and an observed X5 share the parent X3 and the
/// children X8, X9, X10, so `{L1, X5}` forms an atomic cover whose observed
/// member is d-separated from the latent by `{X3}`.
pub fn observed_latent_pair() -> PolcmGraph {
    PolcmGraph::new(
        1,
        6,
        [
            (2, 0),
            (2, 1),
            (2, 3),
            (0, 4),
            (0, 5),
            (0, 6),
            (3, 4),
            (3, 5),
            (3, 6),
        ],
    )
    .unwrap()
    .with_names(vec![
        "L1".into(),
        "X2".into(),
        "X3".into(),
        "X5".into(),
        "X8".into(),
        "X9".into(),
        "X10".into(),
    ])
    .unwrap()
}

/// Two latents in a chain, each with three observed pure children.
pub fn latent_chain() -> PolcmGraph {
    PolcmGraph::new(
        2,
        6,
        [(0, 1), (0, 2), (0, 3), (0, 4), (1, 5), (1, 6), (1, 7)],
    )
    .unwrap()
    .with_names(vec![
        "L1".into(),
        "L4".into(),
        "X6".into(),
        "X7".into(),
        "X8".into(),
        "X13".into(),
        "X14".into(),
        "X15".into(),
    ])
    .unwrap()
}

/// One latent with an observed parent (X2), four pure children (X3..X6)
/// and observed-to-observed edges downstream, including a collider at X9.
pub fn anchored_single_latent() -> PolcmGraph {
    PolcmGraph::new(
        1,
        8,
        [
            (1, 0),
            (0, 2),
            (0, 3),
            (0, 4),
            (0, 5),
            (1, 6),
            (2, 7),
            (4, 8),
            (5, 8),
        ],
    )
    .unwrap()
}

/// Latent root L1 with pure children X3..X5 plus a latent child L2 that in
/// turn anchors X6..X8; one extra observed edge X3 -> X9.
pub fn two_latent_cascade() -> PolcmGraph {
    PolcmGraph::new(
        2,
        7,
        [
            (0, 1),
            (0, 2),
            (0, 3),
            (0, 4),
            (1, 5),
            (1, 6),
            (1, 7),
            (2, 8),
        ],
    )
    .unwrap()
}

/// Two single-latent clusters linked through observed variables, with all
/// four coefficient blocks nonzero and an observed collider at X13.
pub fn mixed_clusters() -> PolcmGraph {
    PolcmGraph::new(
        2,
        11,
        [
            (2, 0),
            (2, 3),
            (0, 4),
            (0, 5),
            (0, 6),
            (3, 7),
            (6, 1),
            (1, 8),
            (1, 9),
            (1, 10),
            (3, 11),
            (10, 12),
            (7, 12),
        ],
    )
    .unwrap()
}

/// Two disjoint twin pairs, each with six shared children: two independent
/// rotation indeterminacies in one model.
pub fn double_twin_pairs() -> PolcmGraph {
    let mut edges = Vec::new();
    for j in 4..10 {
        edges.push((0, j));
        edges.push((1, j));
    }
    for j in 10..16 {
        edges.push((2, j));
        edges.push((3, j));
    }
    PolcmGraph::new(4, 12, edges).unwrap()
}

/// A rotation-indeterminate twin pair whose child X9 feeds a third,
/// well-anchored latent.
pub fn twins_with_outlet() -> PolcmGraph {
    let mut edges = Vec::new();
    for j in 3..9 {
        edges.push((0, j));
        edges.push((1, j));
    }
    edges.extend([(8, 2), (2, 9), (2, 10), (2, 11)]);
    PolcmGraph::new(3, 9, edges).unwrap()
}

/// Three latents sharing eight observed children: a rank-three rotation
/// indeterminacy.
pub fn triple_twins() -> PolcmGraph {
    let edges = (3..11).flat_map(|j| [(0, j), (1, j), (2, j)]);
    PolcmGraph::new(3, 8, edges).unwrap()
}

/// Root twins with six shared children and an observed chain hanging off
/// one of them.
pub fn twins_with_tail() -> PolcmGraph {
    let mut edges: Vec<(usize, usize)> = (2..8).flat_map(|j| vec![(0, j), (1, j)]).collect();
    edges.extend([(7, 8), (8, 9)]);
    PolcmGraph::new(2, 8, edges).unwrap()
}

/// A well-anchored latent root whose two latent children are twins
/// (identical parents and children), so only the bottom pair rotates.
/// Note the twins here carry non-unit noise once every variance is pinned
/// to one, so the rotation family is exact only on the unit-noise scale.
pub fn twins_under_root() -> PolcmGraph {
    let mut edges = vec![(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)];
    for j in 6..12 {
        edges.push((1, j));
        edges.push((2, j));
    }
    PolcmGraph::new(3, 9, edges).unwrap()
}

/// Fixture for the two graph rewrites: `{L2, X1}` has the non-adjacent pure
/// child X5 (skeleton operator adds L2 -> X5), and L4 is an all-latent pure
/// child of L1 eligible for merging (the minimal-graph operator deletes L4
/// and re-parents X6, X7, X8 to L1).
pub fn operator_demo() -> PolcmGraph {
    PolcmGraph::new(
        3,
        11,
        [
            (12, 0),
            (13, 0),
            (0, 2),
            (0, 5),
            (2, 8),
            (2, 9),
            (2, 10),
            (4, 1),
            (4, 3),
            (11, 1),
            (11, 3),
            (1, 6),
            (3, 6),
            (3, 7),
        ],
    )
    .unwrap()
    .with_names(vec![
        "L1".into(),
        "L2".into(),
        "L4".into(),
        "X1".into(),
        "X2".into(),
        "X3".into(),
        "X4".into(),
        "X5".into(),
        "X6".into(),
        "X7".into(),
        "X8".into(),
        "X9".into(),
        "X13".into(),
        "X14".into(),
    ])
    .unwrap()
}

/// Five nodes, four simple treks between X4 and X5. Used to demonstrate the
/// trek-rule covariance expansion.
pub fn trek_demo() -> PolcmGraph {
    PolcmGraph::new(1, 4, [(1, 0), (1, 2), (0, 3), (0, 4), (2, 3), (2, 4)]).unwrap()
}

/// Fixed coefficients for [`trek_demo`], with unit noise.
pub fn trek_demo_coefficients(g: &PolcmGraph) -> (WeightMatrix, NoiseSpec) {
    let f = WeightMatrix::from_coefficients(
        g,
        [
            (1, 0, 0.4),
            (1, 2, 0.5),
            (0, 3, 0.6),
            (0, 4, 0.7),
            (2, 3, -0.3),
            (2, 4, 0.8),
        ],
    )
    .unwrap();
    (f, NoiseSpec::unit(g.num_latent(), g.num_nodes()))
}

/// Random coefficients on the graph's support plus random observed noise
/// variances; latent noise is left at 1. Deterministic in `seed`.
pub fn random_model(g: &PolcmGraph, seed: u64) -> (WeightMatrix, NoiseSpec) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = WeightMatrix::zeros(g);
    for (p, c) in g.edges().collect::<Vec<_>>() {
        let mag: f64 = rng.gen_range(0.3..1.2);
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        f.set(p, c, sign * mag).unwrap();
    }
    let m = g.num_latent();
    let omega = DVector::from_iterator(
        g.num_nodes(),
        (0..g.num_nodes()).map(|i| if i < m { 1.0 } else { rng.gen_range(0.5..2.0) }),
    );
    (f, NoiseSpec::new(m, omega).unwrap())
}

/// Fixtures whose coefficients are recoverable up to per-latent sign.
pub fn group_sign_fixtures() -> Vec<(String, PolcmGraph)> {
    vec![
        ("latent_chain".into(), latent_chain()),
        ("three_latent_hierarchy".into(), three_latent_hierarchy()),
        ("anchored_single_latent".into(), anchored_single_latent()),
        ("two_latent_cascade".into(), two_latent_cascade()),
        ("mixed_clusters".into(), mixed_clusters()),
    ]
}

/// Fixtures whose latent blocks are recoverable only up to rotation.
pub fn orthogonal_fixtures() -> Vec<(String, PolcmGraph)> {
    vec![
        (
            "twin_latents_shared_children".into(),
            twin_latents_shared_children(),
        ),
        ("double_twin_pairs".into(), double_twin_pairs()),
        ("twins_with_outlet".into(), twins_with_outlet()),
        ("triple_twins".into(), triple_twins()),
        ("twins_with_tail".into(), twins_with_tail()),
    ]
}

/// Fixtures solvable in closed form from the population covariance.
pub fn algebraic_fixtures() -> Vec<(String, PolcmGraph)> {
    vec![
        (
            "single_latent_three_children".into(),
            single_latent_three_children(),
        ),
        ("latent_chain".into(), latent_chain()),
        ("anchored_single_latent".into(), anchored_single_latent()),
        ("two_latent_cascade".into(), two_latent_cascade()),
        ("mixed_clusters".into(), mixed_clusters()),
    ]
}
