//! Gaussian likelihood fitting of the edge coefficients.
//!
//! Two parameterizations of the same fit:
//!
//! * `Tr` — free parameters are the supported coefficients only; the noise
//!   diagonal is eliminated exactly by solving the unit-variance constraint
//!   (a triangular system in topological order). Iterates for which no
//!   positive noise exists score infinity and are rejected.
//! * `Lm` — coefficients plus log noise variances are free, and the unit
//!   latent variance constraint enters as a quadratic penalty.
//!
//! Gradients come either from a reverse-mode derivation through the
//! covariance algebra (including the implicit derivative of the eliminated
//! noise in `Tr`) or from central finite differences, kept as an oracle.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{NoiseSpec, WeightMatrix};
use crate::error::PolcmError;
use crate::graph::{NodeId, PolcmGraph};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Tr,
    Lm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientBackend {
    AnalyticReverse,
    FiniteDifference,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub method: Method,
    pub restarts: usize,
    pub learning_rate: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Initial coefficients are drawn uniformly from `[-init_scale, init_scale]`.
    pub init_scale: f64,
    /// Per-sample weight of the unit-variance penalty in `Lm`; the
    /// effective weight is `lm_penalty_weight * k` so the penalty keeps
    /// pace with the likelihood term.
    pub lm_penalty_weight: f64,
    pub backend: GradientBackend,
    pub seed: u64,
    pub parallel: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            method: Method::Tr,
            restarts: 30,
            learning_rate: 0.02,
            max_iters: 5000,
            grad_tol: 1e-7,
            init_scale: 1.0,
            lm_penalty_weight: 100.0,
            backend: GradientBackend::AnalyticReverse,
            seed: 0,
            parallel: true,
        }
    }
}

/// Per-restart diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct RestartOutcome {
    pub restart_index: usize,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct EstimateResult {
    pub f_hat: WeightMatrix,
    pub omega_hat: NoiseSpec,
    /// Negative log-likelihood of the observed block (penalty excluded).
    pub nll: f64,
    /// The minimised objective (equals `nll` for `Tr`).
    pub objective: f64,
    pub restart_index: usize,
    pub converged: bool,
    pub iterations: usize,
    pub restarts: Vec<RestartOutcome>,
}

/// `(K/2) (tr(Sigma^{-1} S) + log det Sigma)` for the observed block.
pub fn nll(sigma_model_x: &DMatrix<f64>, sigma_hat: &DMatrix<f64>, k: usize) -> Result<f64> {
    if sigma_model_x.nrows() != sigma_hat.nrows() {
        return Err(PolcmError::DimensionMismatch(format!(
            "model block is {}x{}, sample covariance {}x{}",
            sigma_model_x.nrows(),
            sigma_model_x.ncols(),
            sigma_hat.nrows(),
            sigma_hat.ncols()
        )));
    }
    let chol = Cholesky::new(sigma_model_x.clone())
        .ok_or_else(|| PolcmError::InvalidIterate("model covariance is not positive definite".into()))?;
    let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let trace = chol.solve(sigma_hat).trace();
    Ok(0.5 * k as f64 * (trace + logdet))
}

/// Shared per-fit state.
struct Problem {
    num_latent: usize,
    dims: usize,
    support: Vec<(usize, usize)>,
    topo: Vec<usize>,
    sigma_hat: DMatrix<f64>,
    k: usize,
    method: Method,
    penalty: f64,
}

impl Problem {
    fn new(g: &PolcmGraph, sigma_hat: &DMatrix<f64>, k: usize, cfg: &EstimatorConfig) -> Result<Self> {
        if sigma_hat.nrows() != g.num_observed() || sigma_hat.ncols() != g.num_observed() {
            return Err(PolcmError::DimensionMismatch(format!(
                "covariance is {}x{} but the graph has {} observed nodes",
                sigma_hat.nrows(),
                sigma_hat.ncols(),
                g.num_observed()
            )));
        }
        Ok(Self {
            num_latent: g.num_latent(),
            dims: g.num_nodes(),
            support: g.edges().map(|(p, c)| (p.0, c.0)).collect(),
            topo: g.topological_order()?.into_iter().map(|v| v.0).collect(),
            sigma_hat: sigma_hat.clone(),
            k,
            method: cfg.method,
            penalty: cfg.lm_penalty_weight * k as f64,
        })
    }

    fn num_params(&self) -> usize {
        match self.method {
            Method::Tr => self.support.len(),
            Method::Lm => self.support.len() + self.dims,
        }
    }

    fn f_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let mut f = DMatrix::zeros(self.dims, self.dims);
        for (idx, &(j, i)) in self.support.iter().enumerate() {
            f[(j, i)] = x[idx];
        }
        f
    }

    fn total_effects(&self, f: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        (DMatrix::identity(self.dims, self.dims) - f).try_inverse()
    }

    /// Unit-variance noise, or `None` if infeasible at this iterate.
    fn solve_omega(&self, w: &DMatrix<f64>) -> Option<DVector<f64>> {
        let d = self.dims;
        let mut omega = DVector::zeros(d);
        for &i in &self.topo {
            let mut acc = 0.0;
            for kk in 0..d {
                if kk != i {
                    let wk = w[(kk, i)];
                    acc += wk * wk * omega[kk];
                }
            }
            let wi = 1.0 - acc;
            if wi <= 1e-10 {
                return None;
            }
            omega[i] = wi;
        }
        Some(omega)
    }

    fn omega_of(&self, x: &[f64], w: &DMatrix<f64>) -> Option<DVector<f64>> {
        match self.method {
            Method::Tr => self.solve_omega(w),
            Method::Lm => {
                let ne = self.support.len();
                Some(DVector::from_iterator(
                    self.dims,
                    x[ne..].iter().map(|s| s.exp()),
                ))
            }
        }
    }

    /// Objective value; `INFINITY` for infeasible or non-PD iterates.
    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x, false).map(|(v, _)| v).unwrap_or(f64::INFINITY)
    }

    fn value_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        match self.eval(x, true) {
            Some((v, Some(g))) => (v, g),
            _ => (f64::INFINITY, vec![0.0; x.len()]),
        }
    }

    fn eval(&self, x: &[f64], want_grad: bool) -> Option<(f64, Option<Vec<f64>>)> {
        let d = self.dims;
        let m = self.num_latent;
        let n = d - m;
        let f = self.f_matrix(x);
        let w = self.total_effects(&f)?;
        let omega = self.omega_of(x, &w)?;
        let ow = DMatrix::from_diagonal(&omega) * &w;
        let sigma = w.transpose() * &ow;
        let sigma_x = sigma.view((m, m), (n, n)).into_owned();
        let chol = Cholesky::new(sigma_x)?;
        let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let trace = chol.solve(&self.sigma_hat).trace();
        let half_k = 0.5 * self.k as f64;
        let mut value = half_k * (trace + logdet);
        if let Method::Lm = self.method {
            for i in 0..m {
                let r = sigma[(i, i)] - 1.0;
                value += self.penalty * r * r;
            }
        }
        if !value.is_finite() {
            return None;
        }
        if !want_grad {
            return Some((value, None));
        }

        // Reverse sweep. d(nll)/d(Sigma_X) = (K/2)(Sx^{-1} - Sx^{-1} S_hat Sx^{-1}).
        let sx_inv = chol.inverse();
        let g_x = (&sx_inv - &sx_inv * &self.sigma_hat * &sx_inv) * half_k;
        let mut s_bar = DMatrix::zeros(d, d);
        s_bar.view_mut((m, m), (n, n)).copy_from(&g_x);
        if let Method::Lm = self.method {
            for i in 0..m {
                s_bar[(i, i)] += 2.0 * self.penalty * (sigma[(i, i)] - 1.0);
            }
        }

        // Sigma = W' Omega W gives W_bar = 2 Omega W S_bar (S_bar symmetric)
        // and omega_bar = diag(W S_bar W').
        let ws = &w * &s_bar;
        let mut w_bar = DMatrix::from_diagonal(&omega) * &ws * 2.0;
        let omega_bar =
            DVector::from_iterator(d, (0..d).map(|kk| ws.row(kk).dot(&w.row(kk))));

        let mut grad = vec![0.0; x.len()];
        match self.method {
            Method::Tr => {
                // omega is implicit via A omega = 1 with A[(i,k)] = W[(k,i)]^2.
                // lambda solves A' lambda = omega_bar, and the chain rule adds
                // -2 W[(k,i)] lambda_i omega_k to W_bar[(k,i)].
                let mut a_t = DMatrix::zeros(d, d);
                for i in 0..d {
                    for kk in 0..d {
                        a_t[(kk, i)] = w[(kk, i)] * w[(kk, i)];
                    }
                }
                let lambda = a_t.lu().solve(&omega_bar)?;
                for kk in 0..d {
                    for i in 0..d {
                        w_bar[(kk, i)] -= 2.0 * w[(kk, i)] * lambda[i] * omega[kk];
                    }
                }
            }
            Method::Lm => {
                let ne = self.support.len();
                for kk in 0..d {
                    grad[ne + kk] = omega_bar[kk] * omega[kk];
                }
            }
        }

        // dW = W dF W, so F_bar = W' W_bar W'.
        let f_bar = w.transpose() * w_bar * w.transpose();
        for (idx, &(j, i)) in self.support.iter().enumerate() {
            grad[idx] = f_bar[(j, i)];
        }
        Some((value, Some(grad)))
    }

    fn fd_grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        let mut xp = x.to_vec();
        for i in 0..x.len() {
            let h = 1e-6 * x[i].abs().max(1.0);
            xp[i] = x[i] + h;
            let fp = self.value(&xp);
            xp[i] = x[i] - h;
            let fm = self.value(&xp);
            xp[i] = x[i];
            g[i] = (fp - fm) / (2.0 * h);
        }
        g
    }
}

struct AdamRun {
    x: Vec<f64>,
    value: f64,
    iterations: usize,
    converged: bool,
}

fn adam_minimize(
    problem: &Problem,
    backend: GradientBackend,
    x0: Vec<f64>,
    lr: f64,
    max_iters: usize,
    grad_tol: f64,
) -> AdamRun {
    let dim = x0.len();
    let (b1, b2, eps) = (0.9, 0.999, 1e-8);
    let mut x = x0;
    let grad_at = |x: &[f64]| -> (f64, Vec<f64>) {
        match backend {
            GradientBackend::AnalyticReverse => problem.value_and_grad(x),
            GradientBackend::FiniteDifference => (problem.value(x), problem.fd_grad(x)),
        }
    };
    let (mut fx, mut gx) = grad_at(&x);
    let mut best_x = x.clone();
    let mut best_f = fx;
    let mut m1 = vec![0.0; dim];
    let mut m2 = vec![0.0; dim];
    let mut converged = false;
    let mut iterations = 0;
    for t in 1..=max_iters {
        iterations = t;
        if !fx.is_finite() {
            break;
        }
        let gmax = gx.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        if gmax < grad_tol {
            converged = true;
            break;
        }
        // Piecewise learning-rate decay for the final polish.
        let frac = t as f64 / max_iters as f64;
        let lr_t = if frac < 0.6 {
            lr
        } else if frac < 0.9 {
            lr / 10.0
        } else {
            lr / 100.0
        };
        let mut step = vec![0.0; dim];
        for i in 0..dim {
            m1[i] = b1 * m1[i] + (1.0 - b1) * gx[i];
            m2[i] = b2 * m2[i] + (1.0 - b2) * gx[i] * gx[i];
            let mh = m1[i] / (1.0 - b1.powi(t as i32));
            let vh = m2[i] / (1.0 - b2.powi(t as i32));
            step[i] = lr_t * mh / (vh.sqrt() + eps);
        }
        // Backtrack into the feasible region if the step lands outside it.
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand: Vec<f64> = (0..dim).map(|i| x[i] - scale * step[i]).collect();
            let (fc, gc) = grad_at(&cand);
            if fc.is_finite() {
                x = cand;
                fx = fc;
                gx = gc;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
        if fx < best_f {
            best_f = fx;
            best_x = x.clone();
        }
    }
    AdamRun {
        x: best_x,
        value: best_f,
        iterations,
        converged,
    }
}

/// A non-random start for the first restart. Preferred source is the
/// closed-form solve from the covariance; when the structure leaves edges
/// unsolved and the method is `Tr`, a penalty-method fit supplies the
/// coefficients instead. The unit-variance feasible region can be
/// disconnected on deep graphs, and random starts may never land in the
/// component holding the optimum; both warm sources sit near it.
fn warm_start(g: &PolcmGraph, problem: &Problem, cfg: &EstimatorConfig) -> Option<Vec<f64>> {
    let coeffs = |f_hat: &WeightMatrix| -> Vec<f64> {
        let mut x = vec![0.0; problem.num_params()];
        for (idx, &(j, i)) in problem.support.iter().enumerate() {
            x[idx] = f_hat.get(NodeId(j), NodeId(i));
        }
        x
    };
    if let Ok(alg) = crate::identify::algebraic_identify(g, &problem.sigma_hat, 1e-9) {
        if alg.unsolved.is_empty() {
            let x = coeffs(&alg.f_hat);
            if problem.value(&x).is_finite() {
                return Some(x);
            }
        }
    }
    if problem.method != Method::Tr {
        return None;
    }
    let lm_cfg = EstimatorConfig {
        method: Method::Lm,
        ..cfg.clone()
    };
    let lm = estimate(g, &problem.sigma_hat, problem.k, &lm_cfg).ok()?;
    let mut x = coeffs(&lm.f_hat);
    // Shrink toward zero until the implied unit-variance noise is feasible;
    // the penalty fit only approximates the variance constraint.
    for _ in 0..60 {
        if problem.value(&x).is_finite() {
            return Some(x);
        }
        for v in x.iter_mut() {
            *v *= 0.95;
        }
    }
    None
}

/// Start for restart `r`: the warm point itself for restart 0, perturbed
/// copies of it (growing radius, shrunk back into feasibility) for the
/// first half of the restarts, random draws for the rest. Perturbation
/// lets the fit hop into neighbouring feasible components the warm point's
/// own basin does not reach.
fn init_for_restart(
    problem: &Problem,
    cfg: &EstimatorConfig,
    warm: Option<&Vec<f64>>,
    r: usize,
) -> Vec<f64> {
    if let Some(w) = warm {
        if r == 0 {
            return w.clone();
        }
        if r <= cfg.restarts / 2 {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(9000 + r as u64));
            let sdev = (0.05 * r as f64).min(0.3);
            let ne = problem.support.len();
            let mut x = w.clone();
            for xi in x.iter_mut().take(ne) {
                *xi += rng.gen_range(-sdev..sdev);
            }
            for _ in 0..60 {
                if problem.value(&x).is_finite() {
                    return x;
                }
                for v in x.iter_mut().take(ne) {
                    *v *= 0.95;
                }
            }
        }
    }
    initial_point(problem, cfg, r)
}

fn initial_point(problem: &Problem, cfg: &EstimatorConfig, restart: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(restart as u64));
    let ne = problem.support.len();
    let mut scale = cfg.init_scale;
    for attempt in 0..100 {
        if attempt > 0 && attempt % 10 == 0 {
            scale *= 0.7;
        }
        let mut x = vec![0.0; problem.num_params()];
        for xi in x.iter_mut().take(ne) {
            *xi = rng.gen_range(-scale..scale);
        }
        // Lm log-variances start at zero (unit noise); always feasible.
        if problem.value(&x).is_finite() {
            return x;
        }
    }
    // Fall back to the zero coefficient vector, feasible by construction.
    vec![0.0; problem.num_params()]
}

/// Objective value and gradient at one parameter vector, computed with the
/// backend selected in the config. The layout of `x` matches the vectors
/// produced by [`restart_schedule`]: one entry per edge in the graph's
/// sorted edge order, followed by per-node log noise variances for `Lm`.
pub fn objective_at(
    g: &PolcmGraph,
    sigma_hat: &DMatrix<f64>,
    k: usize,
    cfg: &EstimatorConfig,
    x: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let problem = Problem::new(g, sigma_hat, k, cfg)?;
    if x.len() != problem.num_params() {
        return Err(PolcmError::DimensionMismatch(format!(
            "expected {} parameters, got {}",
            problem.num_params(),
            x.len()
        )));
    }
    Ok(match cfg.backend {
        GradientBackend::AnalyticReverse => problem.value_and_grad(x),
        GradientBackend::FiniteDifference => (problem.value(x), problem.fd_grad(x)),
    })
}

/// The deterministic sequence of initial parameter vectors the restarts
/// will use. Order is independent of how the restarts are scheduled.
pub fn restart_schedule(
    g: &PolcmGraph,
    sigma_hat: &DMatrix<f64>,
    k: usize,
    cfg: &EstimatorConfig,
) -> Result<Vec<Vec<f64>>> {
    let problem = Problem::new(g, sigma_hat, k, cfg)?;
    let warm = warm_start(g, &problem, cfg);
    Ok((0..cfg.restarts)
        .map(|r| init_for_restart(&problem, cfg, warm.as_ref(), r))
        .collect())
}

/// Fits the model to a sample covariance of the observed variables.
pub fn estimate(
    g: &PolcmGraph,
    sigma_hat: &DMatrix<f64>,
    k: usize,
    cfg: &EstimatorConfig,
) -> Result<EstimateResult> {
    if cfg.restarts == 0 {
        return Err(PolcmError::EstimationFailed("restarts must be positive".into()));
    }
    let problem = Problem::new(g, sigma_hat, k, cfg)?;
    let warm = warm_start(g, &problem, cfg);
    let run_one = |r: usize| -> (usize, AdamRun) {
        let x0 = init_for_restart(&problem, cfg, warm.as_ref(), r);
        let run = adam_minimize(
            &problem,
            cfg.backend,
            x0,
            cfg.learning_rate,
            cfg.max_iters,
            cfg.grad_tol,
        );
        (r, run)
    };
    let mut runs: Vec<(usize, AdamRun)> = if cfg.parallel {
        (0..cfg.restarts).into_par_iter().map(run_one).collect()
    } else {
        (0..cfg.restarts).map(run_one).collect()
    };
    runs.sort_by_key(|(r, _)| *r);

    let outcomes: Vec<RestartOutcome> = runs
        .iter()
        .map(|(r, run)| RestartOutcome {
            restart_index: *r,
            objective: run.value,
            iterations: run.iterations,
            converged: run.converged,
        })
        .collect();
    let best = runs
        .iter()
        .filter(|(_, run)| run.value.is_finite())
        .min_by(|a, b| (a.1.value, a.0).partial_cmp(&(b.1.value, b.0)).unwrap());
    let (best_r, best_run) = best.ok_or_else(|| {
        PolcmError::EstimationFailed(format!(
            "no restart produced a finite objective ({} attempted)",
            cfg.restarts
        ))
    })?;

    let x = &best_run.x;
    let f_dense = problem.f_matrix(x);
    let w = problem
        .total_effects(&f_dense)
        .ok_or_else(|| PolcmError::NumericalDegeneracy("I - F singular at the optimum".into()))?;
    let omega = problem
        .omega_of(x, &w)
        .ok_or_else(|| PolcmError::EstimationFailed("optimum is infeasible".into()))?;
    let mut f_hat = WeightMatrix::zeros(g);
    for (idx, &(j, i)) in problem.support.iter().enumerate() {
        f_hat.set(NodeId(j), NodeId(i), x[idx])?;
    }
    let omega_hat = NoiseSpec::new(g.num_latent(), omega.clone())?;
    let cov = crate::covariance::covariance_full(&f_hat, &omega_hat)?;
    let fit_nll = nll(&cov.sigma_x, sigma_hat, k)?;
    Ok(EstimateResult {
        f_hat,
        omega_hat,
        nll: fit_nll,
        objective: best_run.value,
        restart_index: *best_r,
        converged: best_run.converged,
        iterations: best_run.iterations,
        restarts: outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{covariance_full, unit_variance_noise_solve, WeightMatrix};
    use crate::fixtures;
    use approx::assert_abs_diff_eq;

    /// A ground-truth model on `g` with every variance exactly 1.
    fn unit_model(g: &PolcmGraph, seed: u64) -> (WeightMatrix, NoiseSpec) {
        let mut scale = 0.6;
        for attempt in 0..20 {
            let (f0, _) = fixtures::random_model(g, seed + 1000 * attempt);
            let mut f = WeightMatrix::zeros(g);
            for (j, i, v) in f0.triples() {
                f.set(NodeId(j), NodeId(i), v * scale).unwrap();
            }
            if let Some(omega) = unit_variance_noise_solve(g, &f).unwrap() {
                return (f, omega);
            }
            scale *= 0.8;
        }
        panic!("no feasible unit-variance model found");
    }

    fn quick_cfg(method: Method) -> EstimatorConfig {
        EstimatorConfig {
            method,
            restarts: 6,
            max_iters: 2000,
            parallel: true,
            ..EstimatorConfig::default()
        }
    }

    #[test]
    fn analytic_gradient_matches_finite_differences_tr() {
        let g = fixtures::latent_chain();
        let cfg = quick_cfg(Method::Tr);
        let (f, omega) = unit_model(&g, 4);
        let sigma = covariance_full(&f, &omega).unwrap().sigma_x;
        let problem = Problem::new(&g, &sigma, 500, &cfg).unwrap();
        let x0 = initial_point(&problem, &cfg, 3);
        let (v, ga) = problem.value_and_grad(&x0);
        assert!(v.is_finite());
        let gf = problem.fd_grad(&x0);
        for i in 0..ga.len() {
            let scale = ga[i].abs().max(gf[i].abs()).max(1.0);
            assert_abs_diff_eq!(ga[i] / scale, gf[i] / scale, epsilon = 1e-5);
        }
    }

    #[test]
    fn analytic_gradient_matches_finite_differences_lm() {
        let g = fixtures::mixed_clusters();
        let cfg = quick_cfg(Method::Lm);
        let (f, omega) = unit_model(&g, 9);
        let sigma = covariance_full(&f, &omega).unwrap().sigma_x;
        let problem = Problem::new(&g, &sigma, 500, &cfg).unwrap();
        let mut x0 = initial_point(&problem, &cfg, 0);
        for (i, xi) in x0.iter_mut().enumerate() {
            if i % 3 == 0 {
                *xi += 0.05;
            }
        }
        let (v, ga) = problem.value_and_grad(&x0);
        assert!(v.is_finite());
        let gf = problem.fd_grad(&x0);
        for i in 0..ga.len() {
            let scale = ga[i].abs().max(gf[i].abs()).max(1.0);
            assert_abs_diff_eq!(ga[i] / scale, gf[i] / scale, epsilon = 1e-5);
        }
    }

    #[test]
    fn tr_objective_infinite_when_infeasible() {
        let g = fixtures::single_latent_three_children();
        let cfg = quick_cfg(Method::Tr);
        let sigma = DMatrix::identity(3, 3);
        let problem = Problem::new(&g, &sigma, 100, &cfg).unwrap();
        // |f| > 1 forces a negative child noise under unit variances.
        let x = vec![1.5, 0.2, 0.2];
        assert!(problem.value(&x).is_infinite());
        assert!(problem.value(&[0.5, 0.2, 0.2]).is_finite());
    }

    #[test]
    fn estimate_reaches_truth_level_nll() {
        let g = fixtures::single_latent_three_children();
        let (f, omega) = unit_model(&g, 2);
        let sigma = covariance_full(&f, &omega).unwrap().sigma_x;
        let k = 1000;
        let cfg = EstimatorConfig {
            restarts: 6,
            max_iters: 1500,
            ..EstimatorConfig::default()
        };
        let res = estimate(&g, &sigma, k, &cfg).unwrap();
        let truth_nll = nll(&sigma, &sigma, k).unwrap();
        assert!(
            res.nll <= truth_nll + 1e-4,
            "nll {} vs truth {}",
            res.nll,
            truth_nll
        );
        // Unit variances hold at the fit.
        let cov = covariance_full(&res.f_hat, &res.omega_hat).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(cov.sigma_full[(i, i)], 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn estimate_is_deterministic() {
        let g = fixtures::single_latent_three_children();
        let (f, omega) = unit_model(&g, 5);
        let sigma = covariance_full(&f, &omega).unwrap().sigma_x;
        let cfg = EstimatorConfig {
            restarts: 4,
            max_iters: 300,
            ..EstimatorConfig::default()
        };
        let a = estimate(&g, &sigma, 500, &cfg).unwrap();
        let b = estimate(&g, &sigma, 500, &cfg).unwrap();
        assert_eq!(a.f_hat.matrix(), b.f_hat.matrix());
        assert_eq!(a.restart_index, b.restart_index);
        // Serial and parallel agree.
        let serial = EstimatorConfig {
            parallel: false,
            ..cfg
        };
        let c = estimate(&g, &sigma, 500, &serial).unwrap();
        assert_eq!(a.f_hat.matrix(), c.f_hat.matrix());
    }

    #[test]
    fn estimate_rejects_wrong_dimensions() {
        let g = fixtures::single_latent_three_children();
        let sigma = DMatrix::identity(5, 5);
        assert!(matches!(
            estimate(&g, &sigma, 100, &EstimatorConfig::default()),
            Err(PolcmError::DimensionMismatch(_))
        ));
    }
}
