//! Finite-support couplings between probability vectors.
//!
//! The central primitive is [`min_delta_lifting`]: given two distributions
//! and a relation mask, find the joint coupling placing as much mass as
//! possible on the relation. With 0/1 transport costs this is a max-flow
//! problem on the bipartite admissibility graph, solved exactly with a
//! deterministic augmenting-path order. The off-relation optimum `delta` is
//! the smallest `δ` for which the `δ`-lifting exists.
//!
//! Also here: the maximal (`γ`-)coupling of two vectors on a shared support,
//! the block-mass total-variation bound of an equivalence partition (equal to
//! the lifting optimum on the induced mask), and Gaussian tail helpers used
//! by the analytic relations.

use crate::error::{GmdpError, Result};
use crate::linalg::{normal_cdf, normal_sf, reg_upper_gamma, Col, Mat};

/// A finite lifting `W` with its achieved off-relation mass.
#[derive(Debug, Clone)]
pub struct CouplingMatrix {
    pub w: Mat,
    pub delta: f64,
    pub relation: Vec<Vec<bool>>,
}

impl CouplingMatrix {
    /// Mass placed outside the relation.
    pub fn off_relation_mass(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.w.nrows() {
            for j in 0..self.w.ncols() {
                if !self.relation[i][j] {
                    s += self.w[(i, j)];
                }
            }
        }
        s
    }

    pub fn row_marginal(&self) -> Col {
        Col::from_fn(self.w.nrows(), |i, _| self.w.row(i).iter().sum())
    }

    pub fn col_marginal(&self) -> Col {
        Col::from_fn(self.w.ncols(), |j, _| self.w.column(j).iter().sum())
    }

    /// Conditional distribution over rows given column `j`; `None` when the
    /// column carries no mass.
    pub fn conditional_given_col(&self, j: usize) -> Option<Col> {
        let total: f64 = self.w.column(j).iter().sum();
        if total <= 1e-300 {
            return None;
        }
        Some(Col::from_fn(self.w.nrows(), |i, _| self.w[(i, j)] / total))
    }
}

fn check_probability_vector(p: &Col, name: &str) -> Result<()> {
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(GmdpError::InvalidArgument(format!("{name} sums to {sum}, expected 1")));
    }
    if p.iter().any(|&v| v < -1e-12) {
        return Err(GmdpError::InvalidArgument(format!("{name} has a negative entry")));
    }
    Ok(())
}

/// Minimal-`δ` lifting of `(Δ, Θ)` over relation mask `R`.
///
/// Returns the coupling that minimizes the mass placed on pairs outside `R`;
/// `delta` is the exact optimum of the transportation program. The coupling
/// itself is the one produced by a fixed augmenting-path order, so repeated
/// calls return identical matrices.
pub fn min_delta_lifting(delta_marg: &Col, theta_marg: &Col, relation: &[Vec<bool>]) -> Result<CouplingMatrix> {
    check_probability_vector(delta_marg, "Δ")?;
    check_probability_vector(theta_marg, "Θ")?;
    let n1 = delta_marg.len();
    let n2 = theta_marg.len();
    if relation.len() != n1 || relation.iter().any(|r| r.len() != n2) {
        return Err(GmdpError::Dimension(format!("relation mask must be {n1}×{n2}")));
    }

    // max-flow through the relation: source → rows → (admissible) cols → sink
    let mut w = Mat::zeros(n1, n2);
    let mut row_used = vec![0.0_f64; n1];
    let mut col_used = vec![0.0_f64; n2];
    const TOL: f64 = 1e-15;

    loop {
        // BFS over the residual graph in fixed index order
        // nodes: rows 0..n1, cols n1..n1+n2
        let total = n1 + n2;
        let mut prev = vec![usize::MAX; total];
        let mut seen = vec![false; total];
        let mut queue = std::collections::VecDeque::new();
        for i in 0..n1 {
            if delta_marg[i] - row_used[i] > TOL {
                seen[i] = true;
                prev[i] = usize::MAX - 1; // marks "from source"
                queue.push_back(i);
            }
        }
        let mut reached_col: Option<usize> = None;
        'bfs: while let Some(node) = queue.pop_front() {
            if node < n1 {
                let i = node;
                for j in 0..n2 {
                    if relation[i][j] && !seen[n1 + j] {
                        seen[n1 + j] = true;
                        prev[n1 + j] = i;
                        if theta_marg[j] - col_used[j] > TOL {
                            reached_col = Some(j);
                            break 'bfs;
                        }
                        queue.push_back(n1 + j);
                    }
                }
            } else {
                let j = node - n1;
                // residual arcs col → row exist where W[i][j] > 0
                for i in 0..n1 {
                    if w[(i, j)] > TOL && !seen[i] {
                        seen[i] = true;
                        prev[i] = node;
                        queue.push_back(i);
                    }
                }
            }
        }
        let Some(jlast) = reached_col else { break };

        // reconstruct path and bottleneck
        let mut path = Vec::new(); // (i, j, forward?)
        let mut bottleneck = theta_marg[jlast] - col_used[jlast];
        let mut node = n1 + jlast;
        while prev[node] != usize::MAX - 1 {
            let p = prev[node];
            if node >= n1 {
                // arc row p → col node
                path.push((p, node - n1, true));
            } else {
                // residual arc col p → row node, undoing W[node][p − n1]
                bottleneck = bottleneck.min(w[(node, p - n1)]);
                path.push((node, p - n1, false));
            }
            node = p;
        }
        let first_row = node;
        bottleneck = bottleneck.min(delta_marg[first_row] - row_used[first_row]);
        if bottleneck <= TOL {
            break;
        }

        row_used[first_row] += bottleneck;
        col_used[jlast] += bottleneck;
        for (i, j, forward) in path {
            if forward {
                w[(i, j)] += bottleneck;
            } else {
                w[(i, j)] -= bottleneck;
            }
        }
    }

    // distribute the unrouted mass (all of it necessarily off-relation)
    let mut leftover_rows: Vec<(usize, f64)> = (0..n1)
        .filter_map(|i| {
            let r = delta_marg[i] - row_used[i];
            (r > TOL).then_some((i, r))
        })
        .collect();
    let mut leftover_cols: Vec<(usize, f64)> = (0..n2)
        .filter_map(|j| {
            let c = theta_marg[j] - col_used[j];
            (c > TOL).then_some((j, c))
        })
        .collect();
    let delta_opt: f64 = leftover_rows.iter().map(|&(_, r)| r).sum();
    let mut ri = 0;
    let mut cj = 0;
    while ri < leftover_rows.len() && cj < leftover_cols.len() {
        let (i, r) = leftover_rows[ri];
        let (j, c) = leftover_cols[cj];
        let m = r.min(c);
        w[(i, j)] += m;
        leftover_rows[ri].1 -= m;
        leftover_cols[cj].1 -= m;
        if leftover_rows[ri].1 <= TOL {
            ri += 1;
        }
        if leftover_cols[cj].1 <= TOL {
            cj += 1;
        }
    }

    Ok(CouplingMatrix {
        w,
        delta: delta_opt.max(0.0),
        relation: relation.to_vec(),
    })
}

/// Violation report from [`check_lifting`].
#[derive(Debug, Clone, Default)]
pub struct LiftingReport {
    pub violations: Vec<String>,
}

impl LiftingReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check the three lifting conditions (marginals and off-relation mass ≤ δ)
/// within 1e-9.
pub fn check_lifting(
    candidate: &CouplingMatrix,
    delta_marg: &Col,
    theta_marg: &Col,
    relation: &[Vec<bool>],
    delta: f64,
) -> (bool, LiftingReport) {
    const TOL: f64 = 1e-9;
    let mut report = LiftingReport::default();
    if candidate.w.nrows() != delta_marg.len() || candidate.w.ncols() != theta_marg.len() {
        report.violations.push("dimension mismatch".into());
        return (false, report);
    }
    for i in 0..candidate.w.nrows() {
        let s: f64 = candidate.w.row(i).iter().sum();
        if (s - delta_marg[i]).abs() > TOL {
            report
                .violations
                .push(format!("row {i} sums to {s:.12}, marginal is {:.12}", delta_marg[i]));
        }
    }
    for j in 0..candidate.w.ncols() {
        let s: f64 = candidate.w.column(j).iter().sum();
        if (s - theta_marg[j]).abs() > TOL {
            report
                .violations
                .push(format!("column {j} sums to {s:.12}, marginal is {:.12}", theta_marg[j]));
        }
    }
    if candidate.w.iter().any(|&v| v < -TOL) {
        report.violations.push("negative coupling entry".into());
    }
    let mut off = 0.0;
    for i in 0..candidate.w.nrows() {
        for j in 0..candidate.w.ncols() {
            if !relation[i][j] {
                off += candidate.w[(i, j)];
            }
        }
    }
    if off > delta + TOL {
        report.violations.push(format!("off-relation mass {off:.12} exceeds δ = {delta:.12}"));
    }
    (report.ok(), report)
}

/// Maximal coupling of two vectors on a shared support: common mass on the
/// diagonal plus the normalized product of the positive and negative
/// residuals. The off-diagonal mass equals the total-variation distance.
pub fn gamma_coupling(nu: &Col, nu_tilde: &Col) -> Result<CouplingMatrix> {
    check_probability_vector(nu, "ν")?;
    check_probability_vector(nu_tilde, "ν̃")?;
    if nu.len() != nu_tilde.len() {
        return Err(GmdpError::Dimension("γ-coupling needs a shared support index set".into()));
    }
    let n = nu.len();
    let mut w = Mat::zeros(n, n);
    let mut pos = Col::zeros(n);
    let mut neg = Col::zeros(n);
    let mut tv = 0.0;
    for i in 0..n {
        let common = nu[i].min(nu_tilde[i]);
        w[(i, i)] = common;
        let d = nu[i] - nu_tilde[i];
        if d > 0.0 {
            pos[i] = d;
            tv += d;
        } else {
            neg[i] = -d;
        }
    }
    if tv > 1e-15 {
        for i in 0..n {
            if pos[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                if neg[j] > 0.0 {
                    w[(i, j)] += pos[i] * neg[j] / tv;
                }
            }
        }
    }
    let relation: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| i == j).collect()).collect();
    Ok(CouplingMatrix { w, delta: tv, relation })
}

/// One block of an equivalence partition over the disjoint union of two
/// finite supports.
#[derive(Debug, Clone, Default)]
pub struct Block {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

/// Equivalence partition of `X₁ ⊔ X₂`.
#[derive(Debug, Clone)]
pub struct EquivalencePartition {
    pub blocks: Vec<Block>,
    pub n_left: usize,
    pub n_right: usize,
}

impl EquivalencePartition {
    pub fn new(blocks: Vec<Block>, n_left: usize, n_right: usize) -> Result<Self> {
        let mut seen_l = vec![false; n_left];
        let mut seen_r = vec![false; n_right];
        for b in &blocks {
            for &i in &b.left {
                if i >= n_left || seen_l[i] {
                    return Err(GmdpError::InvalidArgument(format!(
                        "partition does not partition the left support at index {i}"
                    )));
                }
                seen_l[i] = true;
            }
            for &j in &b.right {
                if j >= n_right || seen_r[j] {
                    return Err(GmdpError::InvalidArgument(format!(
                        "partition does not partition the right support at index {j}"
                    )));
                }
                seen_r[j] = true;
            }
        }
        if seen_l.iter().any(|&s| !s) || seen_r.iter().any(|&s| !s) {
            return Err(GmdpError::InvalidArgument("partition does not cover both supports".into()));
        }
        Ok(Self { blocks, n_left, n_right })
    }

    /// Relation mask relating exactly the pairs sharing a block.
    pub fn induced_mask(&self) -> Vec<Vec<bool>> {
        let mut mask = vec![vec![false; self.n_right]; self.n_left];
        for b in &self.blocks {
            for &i in &b.left {
                for &j in &b.right {
                    mask[i][j] = true;
                }
            }
        }
        mask
    }
}

/// Minimal `δ` for which the block-mass discrepancy bound holds:
/// `Σ_blocks max(0, Δ(block∩X₁) − Θ(block∩X₂))`, the total-variation
/// distance between the block-mass vectors. Equals [`min_delta_lifting`] on
/// the induced relation mask.
pub fn quotient_tv(delta_marg: &Col, theta_marg: &Col, partition: &EquivalencePartition) -> Result<f64> {
    if partition.n_left != delta_marg.len() || partition.n_right != theta_marg.len() {
        return Err(GmdpError::Dimension("partition does not cover both supports".into()));
    }
    let mut total = 0.0;
    for b in &partition.blocks {
        let dl: f64 = b.left.iter().map(|&i| delta_marg[i]).sum();
        let tr: f64 = b.right.iter().map(|&j| theta_marg[j]).sum();
        total += (dl - tr).max(0.0);
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Gaussian tails
// ---------------------------------------------------------------------------

/// `P(Σ λ_i z_i² > r²)` for independent standard normal `z_i` and
/// nonnegative weights, by recursive conditioning with adaptive 1-D
/// quadrature. Absolute accuracy well below 1e-6.
pub fn weighted_chi_square_exceedance(lams: &[f64], r2: f64) -> f64 {
    let mut l: Vec<f64> = lams.iter().copied().filter(|&x| x > 1e-300).collect();
    if l.is_empty() {
        return 0.0;
    }
    if r2 <= 0.0 {
        return 1.0;
    }
    l.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let equal = l.iter().all(|&x| (x - l[0]).abs() <= 1e-14 * l[0]);
    if equal {
        // Q ~ λ · χ²_d
        return reg_upper_gamma(l.len() as f64 / 2.0, r2 / (2.0 * l[0]));
    }
    exceed_rec(&l, r2)
}

fn exceed_rec(l: &[f64], r2: f64) -> f64 {
    if r2 <= 0.0 {
        return 1.0;
    }
    if l.len() == 1 {
        return 2.0 * normal_sf((r2 / l[0]).sqrt());
    }
    // condition on the last (smallest-weight) coordinate
    let lam = l[l.len() - 1];
    let rest = &l[..l.len() - 1];
    let z_star = (r2 / lam).sqrt();
    let z_cut = z_star.min(9.0);
    let inner = |z: f64| exceed_rec(rest, r2 - lam * z * z);
    let integrand = |z: f64| {
        (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt() * inner(z)
    };
    let body = adaptive_simpson(&integrand, 0.0, z_cut, 1e-10, 28);
    // beyond z*, the event holds surely; between 9 and z* the density is negligible
    2.0 * normal_sf(z_star) + 2.0 * body
        + if z_star > 9.0 { 2.0 * (normal_sf(9.0) - normal_sf(z_star)) } else { 0.0 }
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, fa, m, fm, flm);
        let right = simpson(m, fm, b, fb, frm);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
                + rec(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
        }
    }
    if b <= a {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fb, fm) = (f(a), f(b), f(m));
    let whole = simpson(a, fa, b, fb, fm);
    rec(f, a, fa, b, fb, m, fm, whole, tol, depth)
}

/// `P(‖ξ‖ > radius)` for `ξ ~ N(0, cov)`, via eigendecomposition of the
/// covariance and adaptive quadrature over the quadratic form.
pub fn gaussian_ball_exceedance(cov: &Mat, radius: f64) -> Result<f64> {
    if radius < 0.0 {
        return Err(GmdpError::InvalidArgument("radius must be nonnegative".into()));
    }
    if cov.nrows() != cov.ncols() {
        return Err(GmdpError::Dimension("covariance must be square".into()));
    }
    if (cov - cov.transpose()).norm() > 1e-9 * cov.norm().max(1.0) {
        return Err(GmdpError::InvalidArgument("covariance not symmetric".into()));
    }
    let eig = cov.clone().symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
    let mut lams = Vec::new();
    for &lam in eig.eigenvalues.iter() {
        if lam < -1e-10 * scale.max(1.0) {
            return Err(GmdpError::InvalidArgument(format!(
                "covariance not PSD: eigenvalue {lam:.3e}"
            )));
        }
        if lam > 1e-14 * scale.max(1e-300) {
            lams.push(lam);
        }
    }
    if lams.is_empty() {
        return Ok(0.0);
    }
    if radius == 0.0 {
        return Ok(1.0);
    }
    Ok(weighted_chi_square_exceedance(&lams, radius * radius))
}

/// Axis-aligned box region for [`truncation_delta`]; other region shapes are
/// rejected with an unsupported-region error.
#[derive(Debug, Clone)]
pub enum Region {
    Box { lo: Col, hi: Col },
    Other(String),
}

/// `δ = 1 − P(e ∈ D)` for a Gaussian with independent coordinates (mean and
/// per-axis standard deviations) and an axis-aligned box `D`.
pub fn truncation_delta(mean: &Col, std: &Col, region: &Region) -> Result<f64> {
    let Region::Box { lo, hi } = region else {
        return Err(GmdpError::UnsupportedRegion(
            "only axis-aligned boxes in decorrelated coordinates are supported".into(),
        ));
    };
    let d = mean.len();
    if std.len() != d || lo.len() != d || hi.len() != d {
        return Err(GmdpError::Dimension("truncation_delta: dimension mismatch".into()));
    }
    if (0..d).any(|i| hi[i] < lo[i]) {
        return Err(GmdpError::InvalidArgument("empty box".into()));
    }
    let mut p_in = 1.0;
    for i in 0..d {
        let s = std[i];
        let f = if s <= 0.0 {
            if mean[i] >= lo[i] && mean[i] <= hi[i] {
                1.0
            } else {
                0.0
            }
        } else {
            normal_cdf((hi[i] - mean[i]) / s) - normal_cdf((lo[i] - mean[i]) / s)
        };
        p_in *= f.clamp(0.0, 1.0);
    }
    Ok((1.0 - p_in).clamp(0.0, 1.0))
}
