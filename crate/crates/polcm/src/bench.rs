//! Benchmark harness: for every (fixture, sample size, seed, method) cell,
//! draw a random model, simulate, standardize, fit, and score against the
//! truth rescaled to the standardized scale. Emits raw rows, per-cell
//! aggregates, and a manifest from which every cell can be rebuilt.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{covariance_full, WeightMatrix};
use crate::error::PolcmError;
use crate::estimator::{estimate, EstimatorConfig, Method};
use crate::fixtures;
use crate::graph::{GraphFile, PolcmGraph};
use crate::metrics::{mse_group_sign, mse_orthogonal, OrthogonalMetricOptions};
use crate::sim::{
    random_polcm, sample_covariance, simulate, standardize, NoiseKind, Nonlinearity, SimConfig,
};
use crate::Result;

/// Deliberate departures from the linear-Gaussian sampling model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Misspec {
    Uniform,
    Lrelu { alpha: f64 },
}

/// Which recovery score a fixture is graded on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    GroupSign,
    Orthogonal,
}

impl MetricKind {
    pub fn label(self) -> &'static str {
        match self {
            MetricKind::GroupSign => "mse_gs",
            MetricKind::Orthogonal => "mse_ot",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchFixture {
    pub name: String,
    pub graph: GraphFile,
    pub metric: MetricKind,
}

/// Full description of a benchmark run. Serialized as-is into the manifest,
/// so a saved spec reproduces every cell bit for bit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchSpec {
    pub fixtures: Vec<BenchFixture>,
    pub sample_sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    pub misspec: Option<Misspec>,
    pub estimator: EstimatorConfig,
    /// Base sampling settings; `sample_size`, `seed`, `noise` and
    /// `nonlinearity` are overridden per cell.
    pub sim: SimConfig,
}

impl BenchSpec {
    /// Defaults shared by every suite: three sample sizes, three seeds,
    /// both fitting methods, no misspecification.
    pub fn with_fixtures(fixtures: Vec<BenchFixture>) -> Self {
        Self {
            fixtures,
            sample_sizes: vec![2000, 5000, 10000],
            seeds: vec![1, 2, 3],
            methods: vec![Method::Tr, Method::Lm],
            misspec: None,
            estimator: EstimatorConfig {
                restarts: 10,
                max_iters: 2000,
                parallel: false,
                ..EstimatorConfig::default()
            },
            sim: SimConfig {
                min_abs_coeff: 0.1,
                ..SimConfig::default()
            },
        }
    }

    /// The ten built-in graphs plus ten generated ones.
    pub fn default_suite() -> Self {
        let mut fixtures = Vec::new();
        for (name, g) in fixtures::group_sign_fixtures() {
            fixtures.push(BenchFixture {
                name,
                graph: g.to_file(),
                metric: MetricKind::GroupSign,
            });
        }
        for (name, g) in fixtures::orthogonal_fixtures() {
            fixtures.push(BenchFixture {
                name,
                graph: g.to_file(),
                metric: MetricKind::Orthogonal,
            });
        }
        fixtures.extend(generated_fixtures(10, 7));
        Self::with_fixtures(fixtures)
    }

    fn validate(&self) -> Result<()> {
        if self.fixtures.is_empty() || self.sample_sizes.is_empty() || self.seeds.is_empty() {
            return Err(PolcmError::MalformedGraph(
                "bench spec needs at least one fixture, sample size, and seed".into(),
            ));
        }
        if self.methods.is_empty() {
            return Err(PolcmError::MalformedGraph(
                "bench spec needs at least one method".into(),
            ));
        }
        Ok(())
    }
}

/// Random graphs of roughly fifteen nodes. Each latent keeps a private
/// anchor child so no two latents share both parent and child sets; the
/// graphs are therefore graded on the group-sign score.
pub fn generated_fixtures(count: usize, seed: u64) -> Vec<BenchFixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let m = rng.gen_range(2..=4usize);
            let d = rng.gen_range(12..=18usize);
            let n = d - m;
            let mut edges = Vec::new();
            for a in 0..m {
                for b in (a + 1)..m {
                    if rng.gen_bool(0.25) {
                        edges.push((a, b));
                    }
                }
                // anchor child, then extras outside the anchor range
                edges.push((a, m + a));
                let extras = rng.gen_range(2..=4usize);
                for _ in 0..extras {
                    let c = rng.gen_range(2 * m..d);
                    if !edges.contains(&(a, c)) {
                        edges.push((a, c));
                    }
                }
            }
            for p in m..d {
                for c in (p + 1)..d {
                    if rng.gen_bool(0.1) {
                        edges.push((p, c));
                    }
                }
            }
            let g = PolcmGraph::new(m, n, edges).expect("generated graph is valid");
            BenchFixture {
                name: format!("generated_{}", i + 1),
                graph: g.to_file(),
                metric: MetricKind::GroupSign,
            }
        })
        .collect()
}

/// One raw measurement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRow {
    pub fixture: String,
    pub method: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
    pub wall_ms: u64,
}

/// A cell where estimation or scoring failed; the run carries on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellFailure {
    pub fixture: String,
    pub method: String,
    pub k: usize,
    pub seed: u64,
    pub error: String,
}

/// Mean and spread of one (fixture, method, K, metric) cell over seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellSummary {
    pub fixture: String,
    pub method: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub cells: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    /// The exact spec that produced the rows below.
    pub manifest: BenchSpec,
    pub rows: Vec<BenchRow>,
    pub summaries: Vec<CellSummary>,
    pub failures: Vec<CellFailure>,
}

/// Installs a global thread pool sized by `POLCM_THREADS` if the variable is
/// set to a positive integer. Safe to call more than once; later calls are
/// no-ops once a pool exists.
pub fn configure_threads_from_env() {
    if let Some(n) = std::env::var("POLCM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// The truth on the standardized scale: each coefficient f_ji becomes
/// f_ji * sd_j / sd_i with standard deviations taken from the population
/// covariance of the linear model.
pub fn standardized_truth(
    f: &WeightMatrix,
    sds: &[f64],
) -> WeightMatrix {
    let d = f.dims();
    let mut mat = f.matrix().clone();
    for j in 0..d {
        for i in 0..d {
            if mat[(j, i)] != 0.0 {
                mat[(j, i)] *= sds[j] / sds[i];
            }
        }
    }
    WeightMatrix::from_dense(f.num_latent(), mat)
}

struct GroupOutput {
    rows: Vec<BenchRow>,
    failures: Vec<CellFailure>,
}

fn run_group(
    spec: &BenchSpec,
    fixture: &BenchFixture,
    g: &PolcmGraph,
    k: usize,
    seed: u64,
) -> GroupOutput {
    let mut out = GroupOutput {
        rows: Vec::new(),
        failures: Vec::new(),
    };
    let fail_all = |msg: String, out: &mut GroupOutput| {
        for &method in &spec.methods {
            out.failures.push(CellFailure {
                fixture: fixture.name.clone(),
                method: method_label(method).into(),
                k,
                seed,
                error: msg.clone(),
            });
        }
    };

    let mut sim_cfg = spec.sim.clone();
    sim_cfg.sample_size = k;
    sim_cfg.seed = seed;
    match spec.misspec {
        Some(Misspec::Uniform) => sim_cfg.noise = NoiseKind::Uniform,
        Some(Misspec::Lrelu { alpha }) => sim_cfg.nonlinearity = Nonlinearity::LeakyRelu { alpha },
        None => {}
    }

    let prepared = (|| -> Result<(WeightMatrix, nalgebra::DMatrix<f64>)> {
        let (f_true, omega_true) = random_polcm(g, &sim_cfg)?;
        let cov = covariance_full(&f_true, &omega_true)?;
        let sds: Vec<f64> = (0..f_true.dims())
            .map(|i| cov.sigma_full[(i, i)].sqrt())
            .collect();
        let truth = standardized_truth(&f_true, &sds);
        let data = simulate(g, &f_true, &omega_true, &sim_cfg)?;
        let sigma_hat = sample_covariance(&standardize(&data)?);
        Ok((truth, sigma_hat))
    })();
    let (truth, sigma_hat) = match prepared {
        Ok(p) => p,
        Err(e) => {
            fail_all(e.to_string(), &mut out);
            return out;
        }
    };

    for &method in &spec.methods {
        let mut est_cfg = spec.estimator.clone();
        est_cfg.method = method;
        est_cfg.seed = seed;
        let start = Instant::now();
        let scored = estimate(g, &sigma_hat, k, &est_cfg).and_then(|fit| {
            let value = match fixture.metric {
                MetricKind::GroupSign => mse_group_sign(&truth, &fit.f_hat)?,
                MetricKind::Orthogonal => {
                    let opts = OrthogonalMetricOptions {
                        seed,
                        ..OrthogonalMetricOptions::default()
                    };
                    mse_orthogonal(&truth, &fit.f_hat, &opts)?.mse
                }
            };
            Ok(value)
        });
        let wall_ms = start.elapsed().as_millis() as u64;
        match scored {
            Ok(value) => out.rows.push(BenchRow {
                fixture: fixture.name.clone(),
                method: method_label(method).into(),
                k,
                seed,
                metric: fixture.metric.label().into(),
                value,
                wall_ms,
            }),
            Err(e) => out.failures.push(CellFailure {
                fixture: fixture.name.clone(),
                method: method_label(method).into(),
                k,
                seed,
                error: e.to_string(),
            }),
        }
    }
    out
}

fn method_label(m: Method) -> &'static str {
    match m {
        Method::Tr => "tr",
        Method::Lm => "lm",
    }
}

/// Runs every cell of the spec. Cells are independent and run on the rayon
/// pool; the output order is fixed by the spec, not by scheduling.
pub fn run_bench(spec: &BenchSpec) -> Result<BenchReport> {
    spec.validate()?;
    configure_threads_from_env();

    let mut groups = Vec::new();
    for fixture in &spec.fixtures {
        let g = PolcmGraph::from_file(&fixture.graph)?;
        for &k in &spec.sample_sizes {
            for &seed in &spec.seeds {
                groups.push((fixture, g.clone(), k, seed));
            }
        }
    }
    let outputs: Vec<GroupOutput> = groups
        .par_iter()
        .map(|(fixture, g, k, seed)| run_group(spec, fixture, g, *k, *seed))
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for o in outputs {
        rows.extend(o.rows);
        failures.extend(o.failures);
    }
    let summaries = aggregate(&rows);
    Ok(BenchReport {
        manifest: spec.clone(),
        rows,
        summaries,
        failures,
    })
}

/// Mean and sample standard deviation per (fixture, method, K, metric).
pub fn aggregate(rows: &[BenchRow]) -> Vec<CellSummary> {
    let mut cells: BTreeMap<(String, String, usize, String), Vec<f64>> = BTreeMap::new();
    for r in rows {
        cells
            .entry((r.fixture.clone(), r.method.clone(), r.k, r.metric.clone()))
            .or_default()
            .push(r.value);
    }
    cells
        .into_iter()
        .map(|((fixture, method, k, metric), values)| {
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let std = if n > 1 {
                (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            CellSummary {
                fixture,
                method,
                k,
                metric,
                mean,
                std,
                cells: n,
            }
        })
        .collect()
}

pub fn write_rows_csv(rows: &[BenchRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_report_json(report: &BenchReport, path: &Path) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(report)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identify::detect_orthogonal_indeterminacy;

    fn tiny_spec() -> BenchSpec {
        let mut spec = BenchSpec::with_fixtures(vec![BenchFixture {
            name: "latent_chain".into(),
            graph: fixtures::latent_chain().to_file(),
            metric: MetricKind::GroupSign,
        }]);
        spec.sample_sizes = vec![500];
        spec.seeds = vec![1, 2];
        spec.methods = vec![Method::Tr];
        spec.estimator.restarts = 4;
        spec.estimator.max_iters = 600;
        spec
    }

    #[test]
    fn bench_runs_and_aggregates() {
        let report = run_bench(&tiny_spec()).unwrap();
        assert!(report.failures.is_empty(), "{:?}", report.failures);
        assert_eq!(report.rows.len(), 2);
        assert_eq!(report.summaries.len(), 1);
        let s = &report.summaries[0];
        assert_eq!(s.cells, 2);
        assert!(s.mean.is_finite() && s.mean >= 0.0);
    }

    #[test]
    fn bench_is_deterministic() {
        let a = run_bench(&tiny_spec()).unwrap();
        let b = run_bench(&tiny_spec()).unwrap();
        let va: Vec<f64> = a.rows.iter().map(|r| r.value).collect();
        let vb: Vec<f64> = b.rows.iter().map(|r| r.value).collect();
        assert_eq!(va, vb);
    }

    #[test]
    fn generated_graphs_are_valid_and_sign_scored() {
        let fixtures = generated_fixtures(10, 7);
        assert_eq!(fixtures.len(), 10);
        for bf in &fixtures {
            let g = PolcmGraph::from_file(&bf.graph).unwrap();
            assert!(g.num_nodes() >= 12 && g.num_nodes() <= 18);
            assert!(g.num_latent() >= 2 && g.num_latent() <= 4);
            assert!(g.topological_order().is_ok());
            // anchor children keep latent blocks rotation-free
            assert!(detect_orthogonal_indeterminacy(&g).unwrap().is_empty());
            assert_eq!(bf.metric, MetricKind::GroupSign);
        }
    }

    #[test]
    fn default_suite_has_twenty_fixtures() {
        let spec = BenchSpec::default_suite();
        assert_eq!(spec.fixtures.len(), 20);
        assert!(spec.validate().is_ok());
    }

    #[test]
    fn standardized_truth_rescales_each_edge() {
        let g = fixtures::trek_demo();
        let (f, _) = fixtures::trek_demo_coefficients(&g);
        let sds = vec![2.0, 1.0, 0.5, 1.0, 4.0];
        let t = standardized_truth(&f, &sds);
        // edge (1, 0): 0.4 * sd_1 / sd_0
        assert!((t.get(crate::NodeId(1), crate::NodeId(0)) - 0.4 * 1.0 / 2.0).abs() < 1e-15);
        // edge (0, 4): 0.7 * sd_0 / sd_4
        assert!((t.get(crate::NodeId(0), crate::NodeId(4)) - 0.7 * 2.0 / 4.0).abs() < 1e-15);
        assert_eq!(t.support(), f.support());
    }

    #[test]
    fn misspec_serde_round_trip() {
        let m: Misspec = serde_json::from_str(r#"{"lrelu":{"alpha":0.3}}"#).unwrap();
        assert_eq!(m, Misspec::Lrelu { alpha: 0.3 });
        let s = serde_json::to_string(&Misspec::Uniform).unwrap();
        assert_eq!(s, "\"uniform\"");
    }
}
