//! Runs the graphical identifiability checks on a few built-in graphs and
//! prints the verdicts with their supporting atomic covers.

use polcm::fixtures;
use polcm::identify::{identify, IdentifyOptions};

fn main() -> polcm::Result<()> {
    let opts = IdentifyOptions::default();
    let graphs = vec![
        ("three_latent_hierarchy", fixtures::three_latent_hierarchy()),
        ("latent_chain", fixtures::latent_chain()),
        ("twin_latents_shared_children", fixtures::twin_latents_shared_children()),
        ("single_latent_three_children", fixtures::single_latent_three_children()),
    ];
    for (name, g) in graphs {
        let report = identify(&g, &opts)?;
        println!("{name}: {:?}", report.verdict);
        for cert in report.atomic_covers.iter().filter(|c| c.latent_count > 0) {
            let members: Vec<&str> = cert.cover.iter().map(|&v| g.name(v)).collect();
            println!("  cover {{{}}} ({} latent)", members.join(", "), cert.latent_count);
        }
        for group in &report.orth_indeterminacy {
            let members: Vec<&str> = group.iter().map(|&v| g.name(v)).collect();
            println!("  rotation-indeterminate block {{{}}}", members.join(", "));
        }
    }
    Ok(())
}
