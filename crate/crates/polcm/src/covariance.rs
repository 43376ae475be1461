//! Population covariance construction and the transforms that leave the
//! observed block invariant.
//!
//! Three interchangeable routes to the same covariance are kept side by
//! side on purpose: the full matrix formula, the block formula, and the
//! simple-trek polynomial expansion. Tests hold them to agreement.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use crate::error::PolcmError;
use crate::graph::{NodeId, PolcmGraph, Trek};
use crate::Result;

/// Dense coefficient matrix `F` with `f[(j, i)]` the edge coefficient from
/// node `j` to node `i`, support locked to a set of admissible entries.
/// Rows/columns follow the latent-first index convention, so the four
/// blocks A (latent rows, latent cols), B (latent rows, observed cols),
/// C and D fall out of index arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    num_latent: usize,
    num_observed: usize,
    mat: DMatrix<f64>,
    support: BTreeSet<(usize, usize)>,
}

impl WeightMatrix {
    /// All-zero matrix whose support is the graph's edge set.
    pub fn zeros(g: &PolcmGraph) -> Self {
        let d = g.num_nodes();
        Self {
            num_latent: g.num_latent(),
            num_observed: g.num_observed(),
            mat: DMatrix::zeros(d, d),
            support: g.edges().map(|(p, c)| (p.0, c.0)).collect(),
        }
    }

    /// Builds from per-edge values; every edge must exist in the graph.
    pub fn from_coefficients(
        g: &PolcmGraph,
        coeffs: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut f = Self::zeros(g);
        for (p, c, v) in coeffs {
            f.set(NodeId(p), NodeId(c), v)?;
        }
        Ok(f)
    }

    /// Wraps an existing dense matrix; support is taken from its nonzero
    /// pattern. Used by the indeterminacy transforms, which may move
    /// support around.
    pub fn from_dense(num_latent: usize, mat: DMatrix<f64>) -> Self {
        let d = mat.nrows();
        let support = (0..d)
            .flat_map(|j| (0..d).map(move |i| (j, i)))
            .filter(|&(j, i)| mat[(j, i)].abs() > 1e-12)
            .collect();
        Self {
            num_latent,
            num_observed: d - num_latent,
            mat,
            support,
        }
    }

    pub fn dims(&self) -> usize {
        self.num_latent + self.num_observed
    }

    pub fn num_latent(&self) -> usize {
        self.num_latent
    }

    pub fn num_observed(&self) -> usize {
        self.num_observed
    }

    pub fn support(&self) -> &BTreeSet<(usize, usize)> {
        &self.support
    }

    pub fn get(&self, parent: NodeId, child: NodeId) -> f64 {
        self.mat[(parent.0, child.0)]
    }

    pub fn set(&mut self, parent: NodeId, child: NodeId, value: f64) -> Result<()> {
        if !self.support.contains(&(parent.0, child.0)) {
            return Err(PolcmError::MalformedGraph(format!(
                "entry ({}, {}) is outside the support",
                parent.0, child.0
            )));
        }
        self.mat[(parent.0, child.0)] = value;
        Ok(())
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    /// Block views in the A/B/C/D layout.
    pub fn block_a(&self) -> DMatrix<f64> {
        let m = self.num_latent;
        self.mat.view((0, 0), (m, m)).into_owned()
    }

    pub fn block_b(&self) -> DMatrix<f64> {
        let (m, n) = (self.num_latent, self.num_observed);
        self.mat.view((0, m), (m, n)).into_owned()
    }

    pub fn block_c(&self) -> DMatrix<f64> {
        let (m, n) = (self.num_latent, self.num_observed);
        self.mat.view((m, 0), (n, m)).into_owned()
    }

    pub fn block_d(&self) -> DMatrix<f64> {
        let (m, n) = (self.num_latent, self.num_observed);
        self.mat.view((m, m), (n, n)).into_owned()
    }

    /// Coefficients as `(parent, child, value)` triples over the support.
    pub fn triples(&self) -> Vec<(usize, usize, f64)> {
        self.support
            .iter()
            .map(|&(j, i)| (j, i, self.mat[(j, i)]))
            .collect()
    }
}

/// Diagonal noise covariance, split into latent and observed parts by the
/// index convention.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    num_latent: usize,
    omega: DVector<f64>,
}

impl NoiseSpec {
    pub fn new(num_latent: usize, omega: DVector<f64>) -> Result<Self> {
        if omega.iter().any(|&w| w <= 0.0) {
            return Err(PolcmError::MalformedGraph(
                "noise variances must be strictly positive".into(),
            ));
        }
        Ok(Self { num_latent, omega })
    }

    pub fn unit(num_latent: usize, dims: usize) -> Self {
        Self {
            num_latent,
            omega: DVector::from_element(dims, 1.0),
        }
    }

    pub fn omega(&self) -> &DVector<f64> {
        &self.omega
    }

    pub fn latent_part(&self) -> DVector<f64> {
        self.omega.rows(0, self.num_latent).into_owned()
    }

    pub fn observed_part(&self) -> DVector<f64> {
        let m = self.num_latent;
        self.omega.rows(m, self.omega.len() - m).into_owned()
    }
}

/// Population covariance with its latent and observed blocks pulled out.
#[derive(Debug, Clone)]
pub struct CovModel {
    pub sigma_full: DMatrix<f64>,
    pub sigma_l: DMatrix<f64>,
    pub sigma_x: DMatrix<f64>,
}

impl CovModel {
    fn from_full(num_latent: usize, sigma_full: DMatrix<f64>) -> Self {
        let d = sigma_full.nrows();
        let m = num_latent;
        let n = d - m;
        let sigma_l = sigma_full.view((0, 0), (m, m)).into_owned();
        let sigma_x = sigma_full.view((m, m), (n, n)).into_owned();
        Self {
            sigma_full,
            sigma_l,
            sigma_x,
        }
    }
}

/// `(I - F)^{-1}` — the total-effect matrix. Invertible for any DAG support.
pub fn total_effects(f: &WeightMatrix) -> Result<DMatrix<f64>> {
    let d = f.dims();
    let i_minus_f = DMatrix::identity(d, d) - f.matrix();
    i_minus_f
        .try_inverse()
        .ok_or_else(|| PolcmError::NumericalDegeneracy("I - F is singular".into()))
}

/// `Sigma = (I - F)^{-T} Omega (I - F)^{-1}`, with blocks extracted.
pub fn covariance_full(f: &WeightMatrix, omega: &NoiseSpec) -> Result<CovModel> {
    let w = total_effects(f)?;
    let scaled = DMatrix::from_diagonal(omega.omega()) * &w;
    let sigma = w.transpose() * scaled;
    Ok(CovModel::from_full(f.num_latent(), sigma))
}

/// Block formula: `M = (I - A - B(I-D)^{-1}C)^{-1}`,
/// `N = ((I-A)C^{-1}(I-D) - B)^{-1}`,
/// `Sigma_L = M' Omega_L M + N' Omega_X N`, and the matching observed block.
///
/// `N` needs a square invertible `C`; the `C = 0` shape (no observed-to-latent
/// edges) short-circuits to the factor-analysis-style form instead. Other
/// shapes are rejected so callers fall back to [`covariance_full`].
pub fn covariance_blocks(f: &WeightMatrix, omega: &NoiseSpec) -> Result<CovModel> {
    let m = f.num_latent();
    let n = f.num_observed();
    let a = f.block_a();
    let b = f.block_b();
    let c = f.block_c();
    let d = f.block_d();
    let omega_l = DMatrix::from_diagonal(&omega.latent_part());
    let omega_x = DMatrix::from_diagonal(&omega.observed_part());
    let i_minus_d_inv = (DMatrix::identity(n, n) - &d)
        .try_inverse()
        .ok_or_else(|| PolcmError::NumericalDegeneracy("I - D is singular".into()))?;

    let c_is_zero = c.iter().all(|&v| v == 0.0);
    let (sigma_l, nb_term) = if c_is_zero {
        // Latents receive nothing from the observed block.
        let m_mat = (DMatrix::identity(m, m) - &a)
            .try_inverse()
            .ok_or_else(|| PolcmError::NumericalDegeneracy("I - A is singular".into()))?;
        (m_mat.transpose() * &omega_l * &m_mat, DMatrix::zeros(n, n))
    } else {
        if m != n {
            return Err(PolcmError::UnsupportedShape(format!(
                "block formula needs square C (m = {m}, n = {n}); use the full formula"
            )));
        }
        let c_inv = c.clone().try_inverse().ok_or_else(|| {
            PolcmError::UnsupportedShape("C is not invertible; use the full formula".into())
        })?;
        let m_mat = (DMatrix::identity(m, m) - &a - &b * &i_minus_d_inv * &c)
            .try_inverse()
            .ok_or_else(|| PolcmError::NumericalDegeneracy("M is singular".into()))?;
        let n_mat = ((DMatrix::identity(m, m) - &a) * &c_inv * (DMatrix::identity(n, n) - &d)
            - &b)
            .try_inverse()
            .ok_or_else(|| PolcmError::NumericalDegeneracy("N is singular".into()))?;
        let sigma_l =
            m_mat.transpose() * &omega_l * &m_mat + n_mat.transpose() * &omega_x * &n_mat;
        let nb = &omega_x * &n_mat * &b;
        (sigma_l, nb)
    };

    let inner = &omega_x + b.transpose() * &sigma_l * &b + &nb_term + nb_term.transpose();
    let sigma_x = i_minus_d_inv.transpose() * inner * &i_minus_d_inv;

    let mut sigma_full = DMatrix::zeros(m + n, m + n);
    sigma_full.view_mut((0, 0), (m, m)).copy_from(&sigma_l);
    sigma_full.view_mut((m, m), (n, n)).copy_from(&sigma_x);
    // Off-diagonal blocks are not part of the block formula; callers that
    // need them use the full route.
    Ok(CovModel {
        sigma_full,
        sigma_l,
        sigma_x,
    })
}

/// Covariance entry by the simple trek rule: sum over simple treks of the
/// top variance times the two path monomials.
pub fn trek_rule_sigma(
    g: &PolcmGraph,
    f: &WeightMatrix,
    node_variances: &DVector<f64>,
    i: NodeId,
    j: NodeId,
) -> Result<f64> {
    if i == j {
        return Ok(node_variances[i.0]);
    }
    let treks = g.enumerate_simple_treks(i, j)?;
    let coeff = |p: NodeId, c: NodeId| f.get(p, c);
    Ok(treks
        .iter()
        .map(|t| {
            node_variances[t.top.0]
                * Trek::path_monomial(&t.path_up, coeff)
                * Trek::path_monomial(&t.path_down, coeff)
        })
        .sum())
}

/// Solves for the unique diagonal noise making every variable's variance 1.
/// The system is triangular in topological order, so a forward sweep
/// suffices. Returns `None` when some node's variance budget is already
/// exceeded by its parents (no unit-variance model exists for this `F`).
pub fn unit_variance_noise_solve(g: &PolcmGraph, f: &WeightMatrix) -> Result<Option<NoiseSpec>> {
    let d = f.dims();
    let w = total_effects(f)?;
    let order = g.topological_order()?;
    let mut omega = DVector::zeros(d);
    for &NodeId(i) in &order {
        // var_i = sum_k w[(k, i)]^2 omega_k; w[(i, i)] = 1.
        let mut acc = 0.0;
        for k in 0..d {
            if k != i {
                let wk = w[(k, i)];
                if wk != 0.0 {
                    acc += wk * wk * omega[k];
                }
            }
        }
        let wi = 1.0 - acc;
        if wi <= 1e-10 {
            return Ok(None);
        }
        omega[i] = wi;
    }
    Ok(Some(NoiseSpec::new(g.num_latent(), omega)?))
}

/// Rescales the latent coordinates by `lambda`, adjusting coefficients and
/// latent noise so the observed covariance block is unchanged.
pub fn rescale_latents(
    f: &WeightMatrix,
    omega: &NoiseSpec,
    lambda: &DVector<f64>,
) -> Result<(WeightMatrix, NoiseSpec)> {
    let m = f.num_latent();
    if lambda.len() != m {
        return Err(PolcmError::DimensionMismatch(format!(
            "lambda has {} entries for {} latents",
            lambda.len(),
            m
        )));
    }
    if lambda.iter().any(|&l| l == 0.0) {
        return Err(PolcmError::MalformedGraph("lambda entries must be nonzero".into()));
    }
    let d = f.dims();
    let mut mat = f.matrix().clone();
    for j in 0..d {
        for i in 0..d {
            let mut v = mat[(j, i)];
            if j < m {
                v /= lambda[j];
            }
            if i < m {
                v *= lambda[i];
            }
            mat[(j, i)] = v;
        }
    }
    let mut new_omega = omega.omega().clone();
    for j in 0..m {
        new_omega[j] *= lambda[j] * lambda[j];
    }
    Ok((
        WeightMatrix::from_dense(m, mat),
        NoiseSpec::new(m, new_omega)?,
    ))
}

/// Rotates the latent coordinates by an orthogonal `q` (latent noise must
/// already be the identity). The observed covariance block is invariant.
pub fn orthogonal_transform(
    f: &WeightMatrix,
    omega: &NoiseSpec,
    q: &DMatrix<f64>,
) -> Result<(WeightMatrix, NoiseSpec)> {
    let m = f.num_latent();
    let d = f.dims();
    if q.nrows() != m || q.ncols() != m {
        return Err(PolcmError::DimensionMismatch(format!(
            "q is {}x{}, expected {m}x{m}",
            q.nrows(),
            q.ncols()
        )));
    }
    let residual = (q.transpose() * q - DMatrix::identity(m, m)).abs().max();
    if residual > 1e-10 {
        return Err(PolcmError::MalformedGraph(format!(
            "q is not orthogonal (residual {residual:.2e})"
        )));
    }
    if omega.latent_part().iter().any(|&w| (w - 1.0).abs() > 1e-10) {
        return Err(PolcmError::MalformedGraph(
            "orthogonal transform requires unit latent noise".into(),
        ));
    }
    // U = blkdiag(Q, I); F_hat = U' F U.
    let mut u = DMatrix::identity(d, d);
    u.view_mut((0, 0), (m, m)).copy_from(q);
    let mat = u.transpose() * f.matrix() * &u;
    Ok((WeightMatrix::from_dense(m, mat), omega.clone()))
}

/// Negates the rows and columns of `F` indexed by `latents` (a scaling by
/// -1, so the observed covariance is unchanged). An involution.
pub fn group_sign_flip(f: &WeightMatrix, latents: &BTreeSet<NodeId>) -> Result<WeightMatrix> {
    let m = f.num_latent();
    if let Some(v) = latents.iter().find(|v| v.0 >= m) {
        return Err(PolcmError::MalformedGraph(format!(
            "node {} is not latent",
            v.0
        )));
    }
    let d = f.dims();
    let mut mat = f.matrix().clone();
    for j in 0..d {
        for i in 0..d {
            let flips = latents.contains(&NodeId(j)) as usize + latents.contains(&NodeId(i)) as usize;
            if flips == 1 {
                mat[(j, i)] = -mat[(j, i)];
            }
        }
    }
    Ok(WeightMatrix {
        num_latent: m,
        num_observed: f.num_observed(),
        mat,
        support: f.support.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;

    #[test]
    fn covariance_full_single_edge() {
        // L1 -> X1 with f = 0.5 and unit noise.
        let g = PolcmGraph::new(1, 1, [(0, 1)]).unwrap();
        let f = WeightMatrix::from_coefficients(&g, [(0, 1, 0.5)]).unwrap();
        let cov = covariance_full(&f, &NoiseSpec::unit(1, 2)).unwrap();
        assert_abs_diff_eq!(cov.sigma_x[(0, 0)], 1.25, epsilon = 1e-12);
        assert_abs_diff_eq!(cov.sigma_full[(0, 1)], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn covariance_full_zero_f_is_omega() {
        let g = PolcmGraph::new(1, 2, [(0, 1)]).unwrap();
        let f = WeightMatrix::zeros(&g);
        let omega = NoiseSpec::new(1, dvector![2.0, 3.0, 4.0]).unwrap();
        let cov = covariance_full(&f, &omega).unwrap();
        assert_abs_diff_eq!(
            cov.sigma_full,
            DMatrix::from_diagonal(&dvector![2.0, 3.0, 4.0]),
            epsilon = 1e-12
        );
    }

    #[test]
    fn block_formula_factor_analysis_shape() {
        // A = C = D = 0: Sigma_X = Omega_X + B' Sigma_L B with Sigma_L = Omega_L.
        let g = PolcmGraph::new(2, 2, [(0, 2), (0, 3), (1, 2), (1, 3)]).unwrap();
        let f = WeightMatrix::from_coefficients(
            &g,
            [(0, 2, 0.7), (0, 3, -0.4), (1, 2, 0.3), (1, 3, 0.9)],
        )
        .unwrap();
        let omega = NoiseSpec::new(2, dvector![1.0, 1.0, 0.5, 0.8]).unwrap();
        let cov = covariance_blocks(&f, &omega).unwrap();
        let b = f.block_b();
        let expected =
            DMatrix::from_diagonal(&dvector![0.5, 0.8]) + b.transpose() * &b;
        assert_abs_diff_eq!(cov.sigma_x, expected, epsilon = 1e-12);
        let full = covariance_full(&f, &omega).unwrap();
        assert_abs_diff_eq!(cov.sigma_x, full.sigma_x, epsilon = 1e-10);
    }

    #[test]
    fn block_formula_zero_latents_decouple() {
        // B = 0, C invertible: Sigma_X = (I-D)^{-T} Omega_X (I-D)^{-1}.
        let g = PolcmGraph::new(1, 1, [(1, 0)]).unwrap();
        let f = WeightMatrix::from_coefficients(&g, [(1, 0, 0.6)]).unwrap();
        let omega = NoiseSpec::new(1, dvector![1.0, 2.0]).unwrap();
        let cov = covariance_blocks(&f, &omega).unwrap();
        assert_abs_diff_eq!(cov.sigma_x[(0, 0)], 2.0, epsilon = 1e-12);
        let full = covariance_full(&f, &omega).unwrap();
        assert_abs_diff_eq!(cov.sigma_x, full.sigma_x, epsilon = 1e-10);
        assert_abs_diff_eq!(cov.sigma_l, full.sigma_l, epsilon = 1e-10);
    }

    #[test]
    fn block_formula_rejects_rectangular_nonzero_c() {
        let g = PolcmGraph::new(1, 2, [(1, 0), (2, 0)]).unwrap();
        let f = WeightMatrix::from_coefficients(&g, [(1, 0, 0.2), (2, 0, 0.3)]).unwrap();
        let omega = NoiseSpec::unit(1, 3);
        assert!(matches!(
            covariance_blocks(&f, &omega),
            Err(PolcmError::UnsupportedShape(_))
        ));
    }

    #[test]
    fn trek_rule_matches_hand_expansion() {
        let g = fixtures::trek_demo();
        let (f, _) = fixtures::trek_demo_coefficients(&g);
        let ones = DVector::from_element(5, 1.0);
        let x4 = g.node_by_name("X4").unwrap();
        let x5 = g.node_by_name("X5").unwrap();
        let l1 = g.node_by_name("L1").unwrap();
        let x2 = g.node_by_name("X2").unwrap();
        let x3 = g.node_by_name("X3").unwrap();
        let f14 = f.get(l1, x4);
        let f15 = f.get(l1, x5);
        let f34 = f.get(x3, x4);
        let f35 = f.get(x3, x5);
        let f21 = f.get(x2, l1);
        let f23 = f.get(x2, x3);
        let expected = f14 * f15 + f34 * f35 + f21 * f14 * f23 * f35 + f23 * f34 * f21 * f15;
        let got = trek_rule_sigma(&g, &f, &ones, x4, x5).unwrap();
        assert_abs_diff_eq!(got, expected, epsilon = 1e-12);
    }

    #[test]
    fn trek_rule_no_trek_is_zero() {
        let g = PolcmGraph::new(0, 2, []).unwrap();
        let f = WeightMatrix::zeros(&g);
        let ones = DVector::from_element(2, 1.0);
        assert_eq!(
            trek_rule_sigma(&g, &f, &ones, NodeId(0), NodeId(1)).unwrap(),
            0.0
        );
    }

    #[test]
    fn trek_rule_single_latent_children() {
        let g = fixtures::single_latent_three_children();
        let f =
            WeightMatrix::from_coefficients(&g, [(0, 1, 0.5), (0, 2, 0.6), (0, 3, 0.7)]).unwrap();
        let ones = DVector::from_element(4, 1.0);
        let s23 = trek_rule_sigma(&g, &f, &ones, NodeId(1), NodeId(2)).unwrap();
        assert_abs_diff_eq!(s23, 0.5 * 0.6, epsilon = 1e-12);
    }

    #[test]
    fn unit_variance_solve_cases() {
        let g = PolcmGraph::new(0, 2, [(0, 1)]).unwrap();
        let f0 = WeightMatrix::zeros(&g);
        let w = unit_variance_noise_solve(&g, &f0).unwrap().unwrap();
        assert_abs_diff_eq!(w.omega()[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.omega()[1], 1.0, epsilon = 1e-12);

        let f = WeightMatrix::from_coefficients(&g, [(0, 1, 0.6)]).unwrap();
        let w = unit_variance_noise_solve(&g, &f).unwrap().unwrap();
        assert_abs_diff_eq!(w.omega()[1], 0.64, epsilon = 1e-12);

        let f = WeightMatrix::from_coefficients(&g, [(0, 1, 1.2)]).unwrap();
        assert!(unit_variance_noise_solve(&g, &f).unwrap().is_none());
    }

    #[test]
    fn rescale_identity_and_variance_scaling() {
        let g = fixtures::single_latent_three_children();
        let f =
            WeightMatrix::from_coefficients(&g, [(0, 1, 0.5), (0, 2, 0.6), (0, 3, 0.7)]).unwrap();
        let omega = NoiseSpec::unit(1, 4);
        let (f1, o1) = rescale_latents(&f, &omega, &dvector![1.0]).unwrap();
        assert_abs_diff_eq!(f1.matrix(), f.matrix(), epsilon = 1e-14);
        assert_abs_diff_eq!(o1.omega(), omega.omega(), epsilon = 1e-14);

        let lam = dvector![1.7];
        let (f2, o2) = rescale_latents(&f, &omega, &lam).unwrap();
        let before = covariance_full(&f, &omega).unwrap();
        let after = covariance_full(&f2, &o2).unwrap();
        assert_abs_diff_eq!(before.sigma_x, after.sigma_x, epsilon = 1e-10);
        assert_abs_diff_eq!(
            after.sigma_l[(0, 0)],
            before.sigma_l[(0, 0)] * lam[0] * lam[0],
            epsilon = 1e-10
        );
    }

    #[test]
    fn group_sign_flip_behaviour() {
        let g = fixtures::single_latent_three_children();
        let f =
            WeightMatrix::from_coefficients(&g, [(0, 1, 0.5), (0, 2, 0.6), (0, 3, 0.7)]).unwrap();
        let empty = BTreeSet::new();
        assert_eq!(group_sign_flip(&f, &empty).unwrap(), f);

        let set: BTreeSet<NodeId> = [NodeId(0)].into();
        let flipped = group_sign_flip(&f, &set).unwrap();
        assert_abs_diff_eq!(flipped.get(NodeId(0), NodeId(1)), -0.5, epsilon = 1e-14);
        // sigma_23 = f12 * f13 is unchanged.
        let ones = DVector::from_element(4, 1.0);
        let before = trek_rule_sigma(&g, &f, &ones, NodeId(1), NodeId(2)).unwrap();
        let after = trek_rule_sigma(&g, &flipped, &ones, NodeId(1), NodeId(2)).unwrap();
        assert_abs_diff_eq!(before, after, epsilon = 1e-14);
        // Involution.
        assert_eq!(group_sign_flip(&flipped, &set).unwrap(), f);
        // Observed nodes are rejected.
        let bad: BTreeSet<NodeId> = [NodeId(2)].into();
        assert!(group_sign_flip(&f, &bad).is_err());
    }

    #[test]
    fn orthogonal_transform_sign_matrix_matches_flip() {
        let g = fixtures::twin_latents_shared_children();
        let (f, omega) = fixtures::random_model(&g, 7);
        let omega = NoiseSpec::new(
            2,
            {
                let mut o = omega.omega().clone();
                o[0] = 1.0;
                o[1] = 1.0;
                o
            },
        )
        .unwrap();
        let q = DMatrix::from_diagonal(&dvector![-1.0, 1.0]);
        let (fq, _) = orthogonal_transform(&f, &omega, &q).unwrap();
        let set: BTreeSet<NodeId> = [NodeId(0)].into();
        let flipped = group_sign_flip(&f, &set).unwrap();
        assert_abs_diff_eq!(fq.matrix(), flipped.matrix(), epsilon = 1e-12);

        // q = I is the identity transform.
        let (fi, _) = orthogonal_transform(&f, &omega, &DMatrix::identity(2, 2)).unwrap();
        assert_abs_diff_eq!(fi.matrix(), f.matrix(), epsilon = 1e-12);

        // Non-orthogonal q rejected.
        let bad = DMatrix::from_diagonal(&dvector![2.0, 1.0]);
        assert!(orthogonal_transform(&f, &omega, &bad).is_err());
    }
}
