//! A miniature benchmark run: two fixtures, one sample size, two seeds.
//! The full twenty-graph suite is `BenchSpec::default_suite()` (also behind
//! the `bench` subcommand of the binary).

use polcm::bench::{run_bench, BenchFixture, BenchSpec, MetricKind};
use polcm::estimator::Method;
use polcm::fixtures;

fn main() -> polcm::Result<()> {
    let mut spec = BenchSpec::with_fixtures(vec![
        BenchFixture {
            name: "latent_chain".into(),
            graph: fixtures::latent_chain().to_file(),
            metric: MetricKind::GroupSign,
        },
        BenchFixture {
            name: "twin_latents".into(),
            graph: fixtures::twin_latents_shared_children().to_file(),
            metric: MetricKind::Orthogonal,
        },
    ]);
    spec.sample_sizes = vec![2000];
    spec.seeds = vec![1, 2];
    spec.methods = vec![Method::Tr];
    spec.estimator.restarts = 6;
    spec.estimator.max_iters = 1200;

    let report = run_bench(&spec)?;
    for s in &report.summaries {
        println!(
            "{:<16} {} K={:<5} {}: {:.4} ({:.4})",
            s.fixture, s.method, s.k, s.metric, s.mean, s.std
        );
    }
    for f in &report.failures {
        println!("failed cell {:?}", f);
    }
    Ok(())
}
