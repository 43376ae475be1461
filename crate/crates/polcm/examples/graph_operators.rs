//! The two covariance-rank-preserving rewrites: the skeleton operator adds
//! latent edges to non-adjacent pure children, the minimal-graph operator
//! merges redundant all-latent covers into their parents.

use polcm::fixtures;
use polcm::identify::{apply_minimal_graph_operator, apply_skeleton_operator, IdentifyOptions};
use polcm::PolcmGraph;

fn describe(label: &str, g: &PolcmGraph) {
    let edges: Vec<String> = g
        .edges()
        .map(|(p, c)| format!("{}->{}", g.name(p), g.name(c)))
        .collect();
    println!("{label}: {} nodes, edges [{}]", g.num_nodes(), edges.join(" "));
}

fn main() -> polcm::Result<()> {
    let opts = IdentifyOptions::default();
    let g = fixtures::operator_demo();
    describe("input", &g);

    let skel = apply_skeleton_operator(&g, &opts)?;
    describe("after skeleton operator", &skel);

    let min = apply_minimal_graph_operator(&skel, &opts)?;
    describe("after minimal-graph operator", &min);
    Ok(())
}
