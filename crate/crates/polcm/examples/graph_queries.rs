//! Structural queries on a mixed latent/observed graph: parents, children,
//! d-separation, and simple trek enumeration.

use polcm::fixtures;
use polcm::NodeId;

fn main() -> polcm::Result<()> {
    let g = fixtures::three_latent_hierarchy();
    println!(
        "{} nodes, {} latent, {} edges",
        g.num_nodes(),
        g.num_latent(),
        g.edges().count()
    );

    let l1 = NodeId(0);
    let names = |s: &std::collections::BTreeSet<NodeId>| {
        s.iter().map(|&v| g.name(v).to_string()).collect::<Vec<_>>().join(", ")
    };
    println!("parents({}) = {}", g.name(l1), names(&g.parents(l1)?));
    println!("children({}) = {}", g.name(l1), names(&g.children(l1)?));

    // X9 and X11 share the latent ancestor L1; conditioning on an observed
    // set cannot block the path through it.
    let x9 = g.node_by_name("X9").unwrap();
    let x11 = g.node_by_name("X11").unwrap();
    let z = std::collections::BTreeSet::from([g.node_by_name("X4").unwrap()]);
    let a = std::collections::BTreeSet::from([x9]);
    let b = std::collections::BTreeSet::from([x11]);
    println!("X9 indep X11 given X4? {}", g.d_separated(&a, &b, &z)?);

    let treks = g.enumerate_simple_treks(x9, x11)?;
    println!("{} simple treks between X9 and X11:", treks.len());
    for t in &treks {
        println!(
            "  top {} up {:?} down {:?}",
            g.name(t.top),
            t.path_up.iter().map(|&v| g.name(v)).collect::<Vec<_>>(),
            t.path_down.iter().map(|&v| g.name(v)).collect::<Vec<_>>(),
        );
    }
    Ok(())
}
