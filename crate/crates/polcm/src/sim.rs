//! Ground-truth model generation and ancestral sampling.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::covariance::{NoiseSpec, WeightMatrix};
use crate::error::PolcmError;
use crate::graph::{NodeId, PolcmGraph};
use crate::Result;

/// Noise family used when sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Gaussian,
    /// Uniform on an interval chosen to match the requested variance.
    Uniform,
}

/// Structural-equation link. `LeakyRelu` bends each assignment through
/// `max(alpha * x, x)`, a deliberate model violation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nonlinearity {
    Linear,
    LeakyRelu { alpha: f64 },
}

/// Simulation settings. Coefficients are drawn uniformly from
/// `coeff_range`, noise variances from `noise_var_range`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub coeff_range: (f64, f64),
    pub noise_var_range: (f64, f64),
    pub noise: NoiseKind,
    pub nonlinearity: Nonlinearity,
    pub sample_size: usize,
    pub seed: u64,
    /// Resample any coefficient whose magnitude falls below this floor.
    /// Zero (the default) keeps the raw uniform draw.
    pub min_abs_coeff: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            coeff_range: (-2.0, 2.0),
            noise_var_range: (1.0, 5.0),
            noise: NoiseKind::Gaussian,
            nonlinearity: Nonlinearity::Linear,
            sample_size: 1000,
            seed: 0,
            min_abs_coeff: 0.0,
        }
    }
}

/// A sampled dataset: rows are draws, columns are the observed variables.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: DMatrix<f64>,
    pub names: Vec<String>,
    pub standardized: bool,
}

fn node_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws edge coefficients and noise variances for the graph. Edge order is
/// the graph's sorted edge set, so the draw is reproducible across runs.
pub fn random_polcm(g: &PolcmGraph, cfg: &SimConfig) -> Result<(WeightMatrix, NoiseSpec)> {
    let (lo, hi) = cfg.coeff_range;
    if !(lo < hi) {
        return Err(PolcmError::MalformedGraph(format!(
            "empty coefficient range [{lo}, {hi}]"
        )));
    }
    let mut rng = node_stream(cfg.seed, 0);
    let mut f = WeightMatrix::zeros(g);
    for (p, c) in g.edges().collect::<Vec<_>>() {
        let mut v: f64 = rng.gen_range(lo..hi);
        while v.abs() < cfg.min_abs_coeff {
            v = rng.gen_range(lo..hi);
        }
        f.set(p, c, v)?;
    }
    let (vlo, vhi) = cfg.noise_var_range;
    let omega = DVector::from_iterator(
        g.num_nodes(),
        (0..g.num_nodes()).map(|_| rng.gen_range(vlo..vhi)),
    );
    Ok((f, NoiseSpec::new(g.num_latent(), omega)?))
}

/// Ancestral sampling in topological order. Each node draws its noise from
/// its own counter-indexed stream of the master seed, so adding or removing
/// nodes elsewhere in the graph does not perturb a node's noise.
pub fn simulate(
    g: &PolcmGraph,
    f: &WeightMatrix,
    omega: &NoiseSpec,
    cfg: &SimConfig,
) -> Result<Dataset> {
    let d = g.num_nodes();
    let k = cfg.sample_size;
    if k == 0 {
        return Err(PolcmError::MalformedGraph("sample_size must be positive".into()));
    }
    let order = g.topological_order()?;
    let mut values = DMatrix::zeros(k, d);
    for &NodeId(i) in &order {
        let var = omega.omega()[i];
        let mut rng = node_stream(cfg.seed, 1 + i as u64);
        let parents = g.parents(NodeId(i))?;
        for r in 0..k {
            let eps = match cfg.noise {
                NoiseKind::Gaussian => {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z * var.sqrt()
                }
                NoiseKind::Uniform => {
                    // U[-a, a] has variance a^2 / 3.
                    let a = (3.0 * var).sqrt();
                    rng.gen_range(-a..a)
                }
            };
            let mut x = eps;
            for &p in &parents {
                x += f.get(p, NodeId(i)) * values[(r, p.0)];
            }
            values[(r, i)] = match cfg.nonlinearity {
                Nonlinearity::Linear => x,
                Nonlinearity::LeakyRelu { alpha } => x.max(alpha * x),
            };
        }
    }
    let m = g.num_latent();
    let n = g.num_observed();
    Ok(Dataset {
        samples: values.view((0, m), (k, n)).into_owned(),
        names: g.observed().map(|v| g.name(v).to_string()).collect(),
        standardized: false,
    })
}

/// Column means.
fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    let k = x.nrows() as f64;
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / k))
}

/// Centers each column and scales it to unit sample variance (the `1/K`
/// convention, matching [`sample_covariance`]).
pub fn standardize(data: &Dataset) -> Result<Dataset> {
    let k = data.samples.nrows();
    let mu = column_means(&data.samples);
    let mut out = data.samples.clone();
    for j in 0..out.ncols() {
        let mut col = out.column_mut(j);
        col.add_scalar_mut(-mu[j]);
        let var = col.iter().map(|v| v * v).sum::<f64>() / k as f64;
        if var < 1e-12 {
            return Err(PolcmError::DegenerateColumn(format!(
                "column {} ({}) has near-zero variance {var:.3e}",
                j, data.names[j]
            )));
        }
        col /= var.sqrt();
    }
    Ok(Dataset {
        samples: out,
        names: data.names.clone(),
        standardized: true,
    })
}

/// Centered sample covariance with the `1/K` normalisation.
pub fn sample_covariance(data: &Dataset) -> DMatrix<f64> {
    let k = data.samples.nrows() as f64;
    let mu = column_means(&data.samples);
    let centered = {
        let mut c = data.samples.clone();
        for j in 0..c.ncols() {
            c.column_mut(j).add_scalar_mut(-mu[j]);
        }
        c
    };
    centered.transpose() * centered / k
}

/// Writes the dataset as CSV with a header row of variable names.
pub fn write_dataset_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&data.names)?;
    for r in 0..data.samples.nrows() {
        let row: Vec<String> = (0..data.samples.ncols())
            .map(|c| format!("{}", data.samples[(r, c)]))
            .collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset written by [`write_dataset_csv`].
pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    let mut r = csv::Reader::from_path(path)?;
    let names: Vec<String> = r.headers()?.iter().map(|s| s.to_string()).collect();
    let mut rows: Vec<f64> = Vec::new();
    let mut nrows = 0;
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != names.len() {
            return Err(PolcmError::MalformedGraph(format!(
                "csv row {} has {} fields, expected {}",
                nrows + 1,
                rec.len(),
                names.len()
            )));
        }
        for field in rec.iter() {
            rows.push(field.trim().parse::<f64>().map_err(|e| {
                PolcmError::MalformedGraph(format!("bad csv value {field:?}: {e}"))
            })?);
        }
        nrows += 1;
    }
    Ok(Dataset {
        samples: DMatrix::from_row_slice(nrows, names.len(), &rows),
        names,
        standardized: false,
    })
}

/// Writes a square covariance matrix as CSV with a header of names.
pub fn write_covariance_csv(sigma: &DMatrix<f64>, names: &[String], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(names)?;
    for r in 0..sigma.nrows() {
        let row: Vec<String> = (0..sigma.ncols()).map(|c| format!("{}", sigma[(r, c)])).collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a covariance CSV, checking squareness and symmetrising.
pub fn read_covariance_csv(path: &Path) -> Result<(DMatrix<f64>, Vec<String>)> {
    let data = read_dataset_csv(path)?;
    let n = data.names.len();
    if data.samples.nrows() != n {
        return Err(PolcmError::DimensionMismatch(format!(
            "covariance csv has {} rows for {} columns",
            data.samples.nrows(),
            n
        )));
    }
    let sym = (&data.samples + data.samples.transpose()) * 0.5;
    Ok((sym, data.names))
}
