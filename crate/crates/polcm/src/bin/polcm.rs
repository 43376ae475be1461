//! Command-line front end: identifiability checks, simulation, fitting,
//! scoring, and the benchmark harness. Exit codes: 0 success, 1 any error,
//! 2 from `check` when the graph is not fully identifiable.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use polcm::bench::{
    configure_threads_from_env, run_bench, standardized_truth, write_report_json, write_rows_csv,
    BenchSpec,
};
use polcm::covariance::covariance_full;
use polcm::estimator::{estimate, EstimatorConfig, Method};
use polcm::graph::GraphFile;
use polcm::identify::{identify, IdentifyOptions, Verdict};
use polcm::metrics::{mse_group_sign, mse_orthogonal, OrthogonalMetricOptions};
use polcm::sim::{
    read_covariance_csv, read_dataset_csv, sample_covariance, simulate, standardize,
    write_dataset_csv, NoiseKind, Nonlinearity, SimConfig,
};
use polcm::{NoiseSpec, PolcmGraph, WeightMatrix};

#[derive(Parser)]
#[command(name = "polcm", version, about = "Partially observed linear causal models")]
struct Cli {
    /// Suppress progress output on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide identifiability of a graph and write a report.
    Check(CheckArgs),
    /// Draw a random model on a graph and sample data from it.
    Simulate(SimulateArgs),
    /// Fit edge coefficients to data or to a covariance matrix.
    Estimate(EstimateArgs),
    /// Score an estimate against a saved truth.
    Eval(EvalArgs),
    /// Run the benchmark suite.
    Bench(BenchArgs),
}

#[derive(Args)]
struct CheckArgs {
    graph: PathBuf,
    #[arg(long, default_value_t = 4)]
    max_cover_size: usize,
    #[arg(long, default_value_t = 5)]
    max_sep_size: usize,
    /// Report destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, ValueEnum)]
enum NoiseArg {
    Gaussian,
    Uniform,
}

#[derive(Args)]
struct SimulateArgs {
    graph: PathBuf,
    /// Number of samples.
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "gaussian")]
    noise: NoiseArg,
    /// Bend each structural assignment through max(alpha * x, x).
    #[arg(long)]
    lrelu_alpha: Option<f64>,
    /// Dataset destination (CSV, observed columns only).
    #[arg(long)]
    out: PathBuf,
    /// Where to save the generating model.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Copy, Clone, ValueEnum)]
enum MethodArg {
    Tr,
    Lm,
}

#[derive(Args)]
struct EstimateArgs {
    graph: PathBuf,
    /// Raw samples (CSV); standardized before fitting.
    #[arg(long, conflicts_with = "cov")]
    data: Option<PathBuf>,
    /// Sample covariance (CSV) instead of raw data; requires --k.
    #[arg(long, requires = "k")]
    cov: Option<PathBuf>,
    /// Sample count behind --cov.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum, default_value = "tr")]
    method: MethodArg,
    #[arg(long, default_value_t = 30)]
    restarts: usize,
    #[arg(long, default_value_t = 0.02)]
    lr: f64,
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, ValueEnum)]
enum MetricArg {
    Gs,
    Ot,
}

#[derive(Args)]
struct EvalArgs {
    /// Truth file written by `simulate --truth`.
    #[arg(long)]
    truth: PathBuf,
    /// Estimate file written by `estimate`.
    #[arg(long)]
    estimate: PathBuf,
    #[arg(long, value_enum, default_value = "gs")]
    metric: MetricArg,
    /// For --metric ot: search rotations of all coordinates, not just the
    /// latent block.
    #[arg(long)]
    full_q: bool,
    /// Compare on the raw scale instead of the standardized one.
    #[arg(long)]
    raw_scale: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Bench spec (JSON); the built-in twenty-graph suite when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value = "bench.csv")]
    out_csv: PathBuf,
    /// Full report with manifest, rows, aggregates, and failures.
    #[arg(long, default_value = "bench.json")]
    out_json: PathBuf,
}

/// On-disk model: the graph with its coefficients, the noise variances, and
/// the coefficients rescaled to the unit-variance scale the estimator works
/// on.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    graph: GraphFile,
    omega: Vec<f64>,
    standardized_coefficients: Vec<(usize, usize, f64)>,
}

#[derive(Serialize, Deserialize)]
struct EstimateFile {
    graph: GraphFile,
    omega: Vec<f64>,
    nll: f64,
    objective: f64,
    method: String,
    converged: bool,
    iterations: usize,
    restart_index: usize,
}

fn load_graph(path: &PathBuf) -> anyhow::Result<(PolcmGraph, Option<Vec<(usize, usize, f64)>>)> {
    PolcmGraph::load(path).with_context(|| format!("reading graph {}", path.display()))
}

fn cmd_check(args: &CheckArgs, quiet: bool) -> anyhow::Result<u8> {
    let (g, _) = load_graph(&args.graph)?;
    let opts = IdentifyOptions {
        max_cover_size: args.max_cover_size,
        max_sep_size: args.max_sep_size,
    };
    let report = identify(&g, &opts)?;
    let text = serde_json::to_string_pretty(&report)?;
    match &args.out {
        Some(p) => std::fs::write(p, &text)?,
        None => println!("{text}"),
    }
    if !quiet && args.out.is_some() {
        println!("verdict: {:?}", report.verdict);
    }
    Ok(if report.verdict == Verdict::FullyIdentifiable {
        0
    } else {
        2
    })
}

fn cmd_simulate(args: &SimulateArgs, quiet: bool) -> anyhow::Result<u8> {
    let (g, coeffs) = load_graph(&args.graph)?;
    let mut cfg = SimConfig {
        sample_size: args.k,
        seed: args.seed,
        min_abs_coeff: 0.1,
        ..SimConfig::default()
    };
    cfg.noise = match args.noise {
        NoiseArg::Gaussian => NoiseKind::Gaussian,
        NoiseArg::Uniform => NoiseKind::Uniform,
    };
    if let Some(alpha) = args.lrelu_alpha {
        cfg.nonlinearity = Nonlinearity::LeakyRelu { alpha };
    }

    // Coefficients stored in the graph file win over random draws; noise
    // variances are always drawn from the config range.
    let (f, omega) = match coeffs {
        Some(triples) => {
            let f = WeightMatrix::from_coefficients(&g, triples)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let (lo, hi) = cfg.noise_var_range;
            let omega = DVector::from_iterator(
                g.num_nodes(),
                (0..g.num_nodes()).map(|_| rng.gen_range(lo..hi)),
            );
            (f, NoiseSpec::new(g.num_latent(), omega)?)
        }
        None => polcm::sim::random_polcm(&g, &cfg)?,
    };

    let data = simulate(&g, &f, &omega, &cfg)?;
    write_dataset_csv(&data, &args.out)?;
    if let Some(path) = &args.truth {
        let cov = covariance_full(&f, &omega)?;
        let sds: Vec<f64> = (0..g.num_nodes())
            .map(|i| cov.sigma_full[(i, i)].sqrt())
            .collect();
        let std_truth = standardized_truth(&f, &sds);
        let mut graph = g.to_file();
        graph.coefficients = Some(f.triples());
        let model = ModelFile {
            graph,
            omega: omega.omega().iter().copied().collect(),
            standardized_coefficients: std_truth.triples(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&model)?)?;
    }
    if !quiet {
        println!(
            "wrote {} samples of {} observed variables to {}",
            args.k,
            g.num_observed(),
            args.out.display()
        );
    }
    Ok(0)
}

fn cmd_estimate(args: &EstimateArgs, quiet: bool) -> anyhow::Result<u8> {
    let (g, _) = load_graph(&args.graph)?;
    let (sigma_hat, k) = match (&args.data, &args.cov) {
        (Some(path), None) => {
            let data = read_dataset_csv(path)?;
            let k = data.samples.nrows();
            (sample_covariance(&standardize(&data)?), k)
        }
        (None, Some(path)) => {
            let (sigma, _names) = read_covariance_csv(path)?;
            (sigma, args.k.context("--cov requires --k")?)
        }
        _ => bail!("provide exactly one of --data or --cov"),
    };
    let cfg = EstimatorConfig {
        method: match args.method {
            MethodArg::Tr => Method::Tr,
            MethodArg::Lm => Method::Lm,
        },
        restarts: args.restarts,
        learning_rate: args.lr,
        max_iters: args.max_iters,
        seed: args.seed,
        ..EstimatorConfig::default()
    };
    let fit = estimate(&g, &sigma_hat, k, &cfg)?;
    let mut graph = g.to_file();
    graph.coefficients = Some(fit.f_hat.triples());
    let out = EstimateFile {
        graph,
        omega: fit.omega_hat.omega().iter().copied().collect(),
        nll: fit.nll,
        objective: fit.objective,
        method: match args.method {
            MethodArg::Tr => "tr".into(),
            MethodArg::Lm => "lm".into(),
        },
        converged: fit.converged,
        iterations: fit.iterations,
        restart_index: fit.restart_index,
    };
    std::fs::write(&args.out, serde_json::to_string_pretty(&out)?)?;
    if !quiet {
        println!(
            "nll {:.6}, restart {} of {}, wrote {}",
            fit.nll,
            fit.restart_index,
            args.restarts,
            args.out.display()
        );
    }
    Ok(0)
}

fn weights_from_file(graph: &GraphFile) -> anyhow::Result<(PolcmGraph, Vec<(usize, usize, f64)>)> {
    let g = PolcmGraph::from_file(graph)?;
    let triples = graph
        .coefficients
        .clone()
        .context("file holds no coefficients")?;
    Ok((g, triples))
}

fn cmd_eval(args: &EvalArgs) -> anyhow::Result<u8> {
    let truth: ModelFile = serde_json::from_str(&std::fs::read_to_string(&args.truth)?)
        .with_context(|| format!("reading truth {}", args.truth.display()))?;
    let est: EstimateFile = serde_json::from_str(&std::fs::read_to_string(&args.estimate)?)
        .with_context(|| format!("reading estimate {}", args.estimate.display()))?;

    let (gt, mut truth_triples) = weights_from_file(&truth.graph)?;
    if !args.raw_scale {
        truth_triples = truth.standardized_coefficients.clone();
    }
    let (ge, est_triples) = weights_from_file(&est.graph)?;
    if gt.num_latent() != ge.num_latent() || gt.num_nodes() != ge.num_nodes() {
        bail!(
            "truth graph has {} nodes ({} latent) but estimate has {} ({} latent)",
            gt.num_nodes(),
            gt.num_latent(),
            ge.num_nodes(),
            ge.num_latent()
        );
    }
    let f_true = WeightMatrix::from_coefficients(&gt, truth_triples)?;
    let f_hat = WeightMatrix::from_coefficients(&ge, est_triples)?;
    let (label, value) = match args.metric {
        MetricArg::Gs => ("mse_gs", mse_group_sign(&f_true, &f_hat)?),
        MetricArg::Ot => {
            let opts = OrthogonalMetricOptions {
                full_q: args.full_q,
                ..OrthogonalMetricOptions::default()
            };
            ("mse_ot", mse_orthogonal(&f_true, &f_hat, &opts)?.mse)
        }
    };
    let text = serde_json::to_string(&serde_json::json!({ "metric": label, "value": value }))?;
    match &args.out {
        Some(p) => std::fs::write(p, &text)?,
        None => println!("{text}"),
    }
    Ok(0)
}

fn cmd_bench(args: &BenchArgs, quiet: bool) -> anyhow::Result<u8> {
    let spec = match &args.spec {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)
            .with_context(|| format!("reading bench spec {}", path.display()))?,
        None => BenchSpec::default_suite(),
    };
    let report = run_bench(&spec)?;
    write_rows_csv(&report.rows, &args.out_csv)?;
    write_report_json(&report, &args.out_json)?;
    if !quiet {
        for s in &report.summaries {
            println!(
                "{:<28} {:<3} K={:<6} {}: {:.4} ({:.4}) over {} seeds",
                s.fixture, s.method, s.k, s.metric, s.mean, s.std, s.cells
            );
        }
        if !report.failures.is_empty() {
            println!("{} cell(s) failed; see {}", report.failures.len(), args.out_json.display());
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    configure_threads_from_env();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Check(a) => cmd_check(a, cli.quiet),
        Command::Simulate(a) => cmd_simulate(a, cli.quiet),
        Command::Estimate(a) => cmd_estimate(a, cli.quiet),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a, cli.quiet),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
