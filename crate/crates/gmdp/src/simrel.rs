//! Construction and certification of `ε,δ`-approximate simulation relations.
//!
//! For an abstract/concrete LTI pair the relation is the sublevel set of a
//! quadratic form, the interface is `u = R·u_s + Q·x_s + K·(x − P·x_s)`, and
//! the one-step error in relation coordinates obeys
//!
//! ```text
//! e' = (A+BK)·e + (B_w − P·B_wi)·w + (B·R − P·B_i)·u_s .
//! ```
//!
//! Two certification routes are provided: a closed-form norm bound (sound,
//! conservative) and a multiplier search over the S-procedure matrix
//! inequality (tighter, still sound — every returned ε is backed by a
//! verified PSD certificate). Both sweep `δ` through `c_w = χ²_k⁻¹(1−δ)`.

use crate::error::{GmdpError, Result};
use crate::linalg::{
    chi_square_inv, chol_upper, reg_upper_gamma, solve_discrete_lyapunov, spectral_norm,
    spectral_radius, Col, Mat,
};

use crate::model::{FiniteGmdp, GaussianLtiGmdp};
use crate::reduction::ReducedModel;
use crate::rng::{unit_sphere, SeedStream};
use rand::Rng;

// ---------------------------------------------------------------------------
// relation / interface / certificate types
// ---------------------------------------------------------------------------

/// Affine interface refining abstract inputs to concrete ones.
#[derive(Debug, Clone)]
pub struct LtiInterface {
    pub r: Mat,
    pub q: Mat,
    pub k: Mat,
    pub p: Mat,
}

impl LtiInterface {
    /// `u = R·u_s + Q·x_s + K·(x − P·x_s)`.
    pub fn concrete_input(&self, u_s: &Col, x_s: &Col, x: &Col) -> Col {
        &self.r * u_s + &self.q * x_s + &self.k * (x - &self.p * x_s)
    }

    /// Identity interface for a self-pair with `m` inputs and `n` states.
    pub fn identity(m: usize, n: usize) -> Self {
        Self {
            r: Mat::identity(m, m),
            q: Mat::zeros(m, n),
            k: Mat::zeros(m, n),
            p: Mat::identity(n, n),
        }
    }
}

/// Quadratic relation `{(x, x_s) : (x − P·x_s)ᵀ M (x − P·x_s) ≤ ε²}`.
#[derive(Debug, Clone)]
pub struct QuadraticRelation {
    pub m: Mat,
    pub p: Mat,
    pub epsilon: f64,
}

impl QuadraticRelation {
    pub fn form_value(&self, x: &Col, x_s: &Col) -> f64 {
        let e = x - &self.p * x_s;
        (e.transpose() * &self.m * e)[(0, 0)]
    }

    pub fn contains(&self, x: &Col, x_s: &Col) -> bool {
        self.form_value(x, x_s) <= self.epsilon * self.epsilon
    }

    /// `M ≻ 0` and `M − CᵀC ⪰ 0` (eigenvalue checks).
    pub fn check_output_dominance(&self, c: &Mat) -> bool {
        let m_eigs = self.m.clone().symmetric_eigen().eigenvalues;
        if m_eigs.min() <= 0.0 {
            return false;
        }
        let gap = &self.m - c.transpose() * c;
        gap.symmetric_eigen().eigenvalues.min() >= -1e-9
    }
}

/// Relation carried by a certificate.
#[derive(Debug, Clone)]
pub enum RelationKind {
    Quadratic(QuadraticRelation),
    /// `‖x₁ − proj·x₂‖ ≤ radius` (identity projection when absent; `x₁` is
    /// the abstract state).
    Ball { radius: f64, proj: Option<Mat> },
    /// Boolean mask over abstract × concrete finite states.
    FiniteMask(Vec<Vec<bool>>),
    Composed(Box<RelationKind>, Box<RelationKind>),
}

impl RelationKind {
    /// Membership for vector-state pairs (abstract, concrete).
    pub fn contains_vectors(&self, x_abs: &Col, x_conc: &Col) -> bool {
        match self {
            RelationKind::Quadratic(q) => q.contains(x_conc, x_abs),
            RelationKind::Ball { radius, proj } => {
                let c = match proj {
                    Some(p) => p * x_conc,
                    None => x_conc.clone(),
                };
                (x_abs - c).norm() <= *radius
            }
            RelationKind::FiniteMask(_) => false,
            RelationKind::Composed(_, _) => false,
        }
    }

    pub fn contains_finite(&self, x_abs: usize, x_conc: usize) -> bool {
        match self {
            RelationKind::FiniteMask(m) => m[x_abs][x_conc],
            _ => false,
        }
    }
}

/// Interface carried by a certificate.
#[derive(Clone)]
pub enum InterfaceKind {
    Identity,
    Lti(LtiInterface),
    /// `u₂ = table[u₁][x₁][x₂]` for finite pairs.
    FiniteMap(Vec<Vec<Vec<usize>>>),
    Composed(Box<InterfaceKind>, Box<InterfaceKind>),
}

impl std::fmt::Debug for InterfaceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InterfaceKind::Identity => write!(f, "Identity"),
            InterfaceKind::Lti(_) => write!(f, "Lti"),
            InterfaceKind::FiniteMap(_) => write!(f, "FiniteMap"),
            InterfaceKind::Composed(a, b) => write!(f, "Composed({a:?}, {b:?})"),
        }
    }
}

/// How a certificate was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    NormBound,
    SProcedure,
    Analytic,
    Lp,
}

/// An `ε,δ`-simulation certificate for a model pair.
#[derive(Debug, Clone)]
pub struct SimRelCertificate {
    pub relation: RelationKind,
    pub interface: InterfaceKind,
    pub delta: f64,
    pub epsilon: f64,
    pub noise_dof: usize,
    pub c1: f64,
    pub provenance: Provenance,
    pub abstract_sig: u64,
    pub concrete_sig: u64,
}

impl SimRelCertificate {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(GmdpError::InvalidArgument(format!("delta {} outside [0,1]", self.delta)));
        }
        if self.epsilon < 0.0 {
            return Err(GmdpError::InvalidArgument("epsilon negative".into()));
        }
        Ok(())
    }
}

/// Trade-off curve: `(δ, ε(δ))` pairs with δ ascending and ε non-increasing.
#[derive(Debug, Clone)]
pub struct TradeoffCurve {
    pub points: Vec<(f64, f64)>,
}

impl TradeoffCurve {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for w in points.windows(2) {
            if w[1].1 > w[0].1 + 1e-9 {
                return Err(GmdpError::InvalidArgument(format!(
                    "epsilon not non-increasing in delta: ε({}) = {} < ε({}) = {}",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        Ok(Self { points })
    }

    pub fn epsilon_at(&self, delta: f64) -> Option<f64> {
        self.points
            .iter()
            .find(|(d, _)| (d - delta).abs() <= 1e-12 * delta.max(1.0))
            .map(|&(_, e)| e)
    }
}

/// Deterministic fingerprint of a model's defining data, used to detect
/// middle-model mismatches when composing certificates.
pub fn lti_signature(m: &GaussianLtiGmdp) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    let mut eat = |x: f64| {
        for b in x.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    for m_ in [&m.a, &m.b, &m.b_w, &m.c] {
        eat(m_.nrows() as f64);
        for v in m_.iter() {
            eat(*v);
        }
    }
    h
}

pub fn finite_signature(m: &FiniteGmdp) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    let mut eat = |x: f64| {
        for b in x.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    for k in &m.kernel {
        for v in k.iter() {
            eat(*v);
        }
    }
    for v in m.init.iter() {
        eat(*v);
    }
    h
}

// ---------------------------------------------------------------------------
// interface and relation synthesis
// ---------------------------------------------------------------------------

/// Interface gains for a concrete/reduced pair: `P, Q, R` from the
/// constrained least-squares model-matching equations, `K` from a Riccati
/// design (or caller-supplied).
pub fn synthesize_interface(
    concrete: &GaussianLtiGmdp,
    reduced: &ReducedModel,
    k_gain: Option<Mat>,
) -> Result<LtiInterface> {
    let rm = &reduced.model;
    let (p, q, r) = crate::linalg::solve_sylvester_ls(
        &concrete.a,
        &concrete.b,
        &rm.a,
        &concrete.c,
        &rm.c,
        &concrete.b_w,
        &rm.b_w,
        &rm.b,
    )?;
    let k = match k_gain {
        Some(k) => {
            if k.shape() != (concrete.n_inputs(), concrete.n_states()) {
                return Err(GmdpError::Dimension("interface gain K shape mismatch".into()));
            }
            k
        }
        None => {
            let lambda = 1e-6;
            let r_u = 0.02;
            let qc = concrete.c.transpose() * &concrete.c
                + Mat::identity(concrete.n_states(), concrete.n_states()) * lambda;
            let rc = Mat::identity(concrete.n_inputs(), concrete.n_inputs()) * r_u;
            crate::linalg::solve_dare(&concrete.a, &concrete.b, &qc, &rc)?.gain
        }
    };
    let rho = spectral_radius(&(&concrete.a + &concrete.b * &k));
    if rho >= 1.0 {
        return Err(GmdpError::NotContractive { alpha: rho });
    }
    Ok(LtiInterface { r, q, k, p })
}

/// Relation matrix from a Lyapunov design: `M` solving
/// `(A+BK)ᵀ M (A+BK) − M = −(CᵀC + λI)`, so `M ⪰ CᵀC + λI ≻ 0` and the
/// closed loop contracts in the `M`-norm.
pub fn default_relation_matrix(a: &Mat, b: &Mat, k: &Mat, c: &Mat, lambda: f64) -> Result<Mat> {
    let acl = a + b * k;
    let q = c.transpose() * c + Mat::identity(a.nrows(), a.ncols()) * lambda;
    solve_discrete_lyapunov(&acl.transpose(), &q)
}

/// Exact-cancellation interface for a concrete model whose leading states
/// mirror the abstract model: `u = u_s + B_s⁻¹(A_s x_s − Ā x)` with `Ā` the
/// leading rows of the concrete `A`. Expressed in the standard gain form.
pub fn exact_cancel_interface(
    concrete: &GaussianLtiGmdp,
    abstract_model: &GaussianLtiGmdp,
) -> Result<LtiInterface> {
    let na = abstract_model.n_states();
    let n = concrete.n_states();
    if na > n || concrete.n_inputs() != abstract_model.n_inputs() {
        return Err(GmdpError::Dimension("abstract model must embed in the concrete states".into()));
    }
    let b_abs_inv = abstract_model
        .b
        .clone()
        .try_inverse()
        .ok_or_else(|| GmdpError::InvalidArgument("abstract input matrix must be invertible".into()))?;
    let b_top = concrete.b.rows(0, na).into_owned();
    if (&b_top - &abstract_model.b).norm() > 1e-9 {
        return Err(GmdpError::Infeasible(
            "interface assumption violated: leading concrete input rows differ from the abstract input matrix"
                .into(),
        ));
    }
    let a_bar = concrete.a.rows(0, na).into_owned();
    let mut p = Mat::zeros(n, na);
    p.view_mut((0, 0), (na, na)).copy_from(&Mat::identity(na, na));
    let k = -(&b_abs_inv * &a_bar);
    let q = &b_abs_inv * &abstract_model.a + &k * &p;
    Ok(LtiInterface { r: Mat::identity(abstract_model.n_inputs(), abstract_model.n_inputs()), q, k, p })
}

// ---------------------------------------------------------------------------
// error system and trade-off computation
// ---------------------------------------------------------------------------

/// One-step error dynamics of a certified pair, in the coordinates
/// `z = L_M (x − P x_s)` with `L_Mᵀ L_M = M`.
#[derive(Debug, Clone)]
pub struct ErrorSystem {
    pub a_bar: Mat,
    pub b_bar: Mat,
    pub r_bar: Mat,
    pub l_m: Mat,
}

impl ErrorSystem {
    pub fn build(
        concrete: &GaussianLtiGmdp,
        reduced: &GaussianLtiGmdp,
        interface: &LtiInterface,
        m: &Mat,
    ) -> Result<Self> {
        let l_m = chol_upper(m)?;
        let l_inv = l_m
            .clone()
            .try_inverse()
            .ok_or_else(|| GmdpError::InvalidArgument("relation matrix factor not invertible".into()))?;
        let acl = &concrete.a + &concrete.b * &interface.k;
        let a_bar = &l_m * acl * &l_inv;
        let b_bar = &l_m * (&concrete.b_w - &interface.p * &reduced.b_w);
        let r_bar = &l_m * (&concrete.b * &interface.r - &interface.p * &reduced.b);
        Ok(Self { a_bar, b_bar, r_bar, l_m })
    }

    /// Induced gains `(α, β, ρ)` of the contraction, noise, and input terms.
    pub fn gains(&self) -> (f64, f64, f64) {
        (spectral_norm(&self.a_bar), spectral_norm(&self.b_bar), spectral_norm(&self.r_bar))
    }

    fn stacked(&self) -> Mat {
        let n = self.a_bar.nrows();
        let k = self.b_bar.ncols();
        let mu = self.r_bar.ncols();
        let mut s = Mat::zeros(n, n + k + mu);
        s.view_mut((0, 0), (n, n)).copy_from(&self.a_bar);
        s.view_mut((0, n), (n, k)).copy_from(&self.b_bar);
        s.view_mut((0, n + k), (n, mu)).copy_from(&self.r_bar);
        s
    }
}

/// Closed-form trade-off: `ε(δ) = (β·√c_w + ρ·√c1) / (1 − α)` with
/// `c_w = χ²_k⁻¹(1−δ)`. Sound by the triangle inequality: the `M`-ellipsoid
/// of radius ε is one-step invariant for every disturbance `wᵀw ≤ c_w`.
pub fn tradeoff_normbound(
    err: &ErrorSystem,
    delta_grid: &[f64],
    c1: f64,
    noise_dof: usize,
) -> Result<TradeoffCurve> {
    let (alpha, beta, rho) = err.gains();
    if alpha >= 1.0 {
        return Err(GmdpError::NotContractive { alpha });
    }
    let mut pts = Vec::with_capacity(delta_grid.len());
    for &d in delta_grid {
        let c_w = if d >= 1.0 { 0.0 } else { chi_square_inv(noise_dof, 1.0 - d)? };
        let eps = (beta * c_w.sqrt() + rho * c1.sqrt()) / (1.0 - alpha);
        pts.push((d, eps));
    }
    TradeoffCurve::new(pts)
}

/// Smallest ε certified by nonnegative multipliers `(τ₁, τ₂, τ₃)` making
///
/// ```text
/// diag(τ₁ I_n, τ₂ I_k, τ₃ I_m) − SᵀS ⪰ 0,   S = [Ā B̄ ρ̄],
/// ε² (1 − τ₁) ≥ τ₂ c_w + τ₃ c1
/// ```
///
/// hold. Multipliers are searched on a coarse grid with local refinement;
/// each candidate is re-verified with a full eigenvalue check (minimum
/// eigenvalue ≥ −1e-9) before acceptance, so the returned ε is always a
/// valid certificate and never exceeds the norm bound.
pub fn tradeoff_sprocedure(
    err: &ErrorSystem,
    delta_grid: &[f64],
    c1: f64,
    noise_dof: usize,
) -> Result<TradeoffCurve> {
    let nb = tradeoff_normbound(err, delta_grid, c1, noise_dof)?;
    let mut pts = Vec::with_capacity(delta_grid.len());
    for &d in nb.points.iter().map(|(d, _)| d) {
        let c_w = if d >= 1.0 { 0.0 } else { chi_square_inv(noise_dof, 1.0 - d)? };
        let fallback = nb.epsilon_at(d).unwrap();
        let eps = sproc_epsilon(err, c_w, c1).map_or(fallback, |e| e.min(fallback));
        pts.push((d, eps));
    }
    // grid-search jitter can break monotonicity by a hair; raising an ε keeps
    // it certified (the same multipliers witness any larger ε)
    for i in (0..pts.len().saturating_sub(1)).rev() {
        if pts[i].1 < pts[i + 1].1 {
            pts[i].1 = pts[i + 1].1;
        }
    }
    TradeoffCurve::new(pts)
}

/// One S-procedure optimization at fixed `c_w`; `None` when no feasible
/// multipliers are found on the grid.
pub fn sproc_epsilon(err: &ErrorSystem, c_w: f64, c1: f64) -> Option<f64> {
    let s = err.stacked();
    let n = err.a_bar.nrows();
    let k = err.b_bar.ncols();
    let mu = err.r_bar.ncols();
    let sts = s.transpose() * &s;
    let alpha2 = spectral_norm(&err.a_bar).powi(2);
    if alpha2 >= 1.0 {
        return None;
    }

    // Fast feasibility for fixed (τ₁, τ₂): Schur complement in the τ₃ block
    // gives the minimal τ₃; the candidate is then re-verified in full.
    let upper = sts.view((0, 0), (n + k, n + k)).into_owned();
    let cross = sts.view((0, n + k), (n + k, mu)).into_owned();
    let corner = sts.view((n + k, n + k), (mu, mu)).into_owned();

    let eval = |t1: f64, t2: f64| -> Option<(f64, f64)> {
        // A = diag(τ₁ I_n, τ₂ I_k) − upper must be PSD
        let mut a = -upper.clone();
        for i in 0..n {
            a[(i, i)] += t1;
        }
        for i in 0..k {
            a[(n + i, n + i)] += t2;
        }
        let eig = a.clone().symmetric_eigen();
        if eig.eigenvalues.min() < -1e-12 {
            return None;
        }
        // τ₃ ≥ corner + crossᵀ A⁺ cross (pseudo-inverse through the eigenbasis)
        let mut t3_mat = corner.clone();
        let scale = eig.eigenvalues.iter().fold(0.0_f64, |acc, &v| acc.max(v.abs()));
        let ut_cross = eig.eigenvectors.transpose() * &cross;
        for i in 0..n + k {
            let lam = eig.eigenvalues[i];
            let row = ut_cross.row(i);
            if lam > 1e-12 * scale.max(1e-300) {
                t3_mat += row.transpose() * row / lam;
            } else if row.norm() > 1e-8 {
                return None; // out of range: no finite τ₃
            }
        }
        let t3 = t3_mat.clone().symmetric_eigen().eigenvalues.max().max(0.0) + 1e-12;
        // full re-verification of the certificate matrix
        let mut g = -sts.clone();
        for i in 0..n {
            g[(i, i)] += t1;
        }
        for i in 0..k {
            g[(n + i, n + i)] += t2;
        }
        for i in 0..mu {
            g[(n + k + i, n + k + i)] += t3;
        }
        if g.symmetric_eigen().eigenvalues.min() < -1e-9 {
            return None;
        }
        let eps2 = (t2 * c_w + t3 * c1) / (1.0 - t1);
        Some((eps2, t3))
    };

    let t1_grid = |lo: f64, hi: f64, m: usize| -> Vec<f64> {
        (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect()
    };
    let t2_grid = |lo: f64, hi: f64, m: usize| -> Vec<f64> {
        (0..m)
            .map(|i| lo * (hi / lo).powf(i as f64 / (m - 1) as f64))
            .collect()
    };

    let mut best: Option<(f64, f64, f64)> = None; // (eps2, t1, t2)
    let consider = |t1: f64, t2: f64, best: &mut Option<(f64, f64, f64)>| {
        if t1 <= alpha2 || t1 >= 1.0 || t2 <= 0.0 {
            return;
        }
        if let Some((e2, _)) = eval(t1, t2) {
            if best.map_or(true, |b| e2 < b.0) {
                *best = Some((e2, t1, t2));
            }
        }
    };

    for &t1 in &t1_grid(alpha2 + 1e-9, 0.99995, 80) {
        for &t2 in &t2_grid(1e-8, 50.0, 80) {
            consider(t1, t2, &mut best);
        }
    }
    // two rounds of local refinement around the incumbent
    for round in 0..2 {
        let Some((_, t1c, t2c)) = best else { return None };
        let span1 = (1.0 - alpha2) / (80.0 * 4.0_f64.powi(round));
        let fac2 = (50.0_f64 / 1e-8).powf(1.0 / 80.0).powf(1.0 / 4.0_f64.powi(round));
        for &t1 in &t1_grid((t1c - span1).max(alpha2 + 1e-9), (t1c + span1).min(0.999999), 25) {
            for &t2 in &t2_grid(t2c / fac2, t2c * fac2, 25) {
                consider(t1, t2, &mut best);
            }
        }
    }
    best.map(|(e2, _, _)| e2.sqrt())
}

/// Result of the sampling falsifier.
#[derive(Debug, Clone)]
pub enum CertifyOutcome {
    Ok,
    Counterexample { z: Col, w: Col, u: Col, error_norm: f64, epsilon: f64 },
}

impl CertifyOutcome {
    pub fn is_ok(&self) -> bool {
        matches!(self, CertifyOutcome::Ok)
    }
}

/// Sample `(e, w, u_s)` on the boundaries of their constraint sets and look
/// for a one-step exit from the ε-ellipsoid while `wᵀw ≤ c_w`. Finding no
/// counterexample is necessary-condition evidence, not proof. Half of the
/// samples are aligned with the locally worst direction so violations of an
/// invalid certificate are found quickly.
pub fn certify_by_sampling(
    err: &ErrorSystem,
    epsilon: f64,
    c_w: f64,
    c1: f64,
    n_samples: usize,
    seed: u64,
) -> CertifyOutcome {
    let n = err.a_bar.nrows();
    let k = err.b_bar.ncols();
    let mu = err.r_bar.ncols();
    let seeds = SeedStream::new(seed);
    let mut rng = seeds.stream(0);
    let tol = epsilon * (1.0 + 1e-9) + 1e-12;
    for i in 0..n_samples {
        let (z, w, u) = if i % 2 == 0 {
            // pure boundary sample
            let z = unit_sphere(&mut rng, n) * epsilon;
            let w = if k > 0 { unit_sphere(&mut rng, k) * c_w.sqrt() } else { Col::zeros(0) };
            let sgn = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let u = if mu > 0 {
                unit_sphere(&mut rng, mu) * (c1.sqrt() * sgn)
            } else {
                Col::zeros(0)
            };
            (z, w, u)
        } else {
            // one alignment step toward the locally worst direction
            let d = unit_sphere(&mut rng, n);
            let zd = err.a_bar.transpose() * &d;
            let z = if zd.norm() > 1e-300 { zd.clone() * (epsilon / zd.norm()) } else { Col::zeros(n) };
            let wd = err.b_bar.transpose() * &d;
            let w = if k > 0 && wd.norm() > 1e-300 {
                wd.clone() * (c_w.sqrt() / wd.norm())
            } else {
                Col::zeros(k)
            };
            let ud = err.r_bar.transpose() * &d;
            let u = if mu > 0 && ud.norm() > 1e-300 {
                ud.clone() * (c1.sqrt() / ud.norm())
            } else {
                Col::zeros(mu)
            };
            (z, w, u)
        };
        let e_next = &err.a_bar * &z + &err.b_bar * &w + &err.r_bar * &u;
        let norm = e_next.norm();
        if norm > tol {
            return CertifyOutcome::Counterexample { z, w, u, error_norm: norm, epsilon };
        }
    }
    CertifyOutcome::Ok
}

// ---------------------------------------------------------------------------
// analytic relations, composition, horizon constant
// ---------------------------------------------------------------------------

/// Certificate for two contractive systems driven by a shared noise source
/// whose realizations differ by at most `c`: output error `ε = H·c/(1−L)`
/// with zero probability slack, relation ball radius `c/(1−L)`.
pub fn analytic_shared_noise_relation(l: f64, h: f64, c: f64) -> Result<SimRelCertificate> {
    if !(0.0..1.0).contains(&l) {
        return Err(GmdpError::InvalidArgument(format!("Lipschitz constant L = {l} must be in (0,1)")));
    }
    if h <= 0.0 || c < 0.0 {
        return Err(GmdpError::InvalidArgument("need H > 0 and c ≥ 0".into()));
    }
    let radius = c / (1.0 - l);
    Ok(SimRelCertificate {
        relation: RelationKind::Ball { radius, proj: None },
        interface: InterfaceKind::Identity,
        delta: 0.0,
        epsilon: h * radius,
        noise_dof: 0,
        c1: 0.0,
        provenance: Provenance::Analytic,
        abstract_sig: 0,
        concrete_sig: 0,
    })
}

/// Transitive composition: `ε = ε_a + ε_b`, `δ = δ_a + δ_b`, relational
/// product of the relations, function composition of the interfaces.
pub fn compose_transitive(
    c12: &SimRelCertificate,
    c23: &SimRelCertificate,
) -> Result<SimRelCertificate> {
    if c12.concrete_sig != c23.abstract_sig {
        return Err(GmdpError::MiddleModelMismatch(format!(
            "certificate chain broken: {:x} vs {:x}",
            c12.concrete_sig, c23.abstract_sig
        )));
    }
    Ok(SimRelCertificate {
        relation: RelationKind::Composed(
            Box::new(c12.relation.clone()),
            Box::new(c23.relation.clone()),
        ),
        interface: InterfaceKind::Composed(
            Box::new(c12.interface.clone()),
            Box::new(c23.interface.clone()),
        ),
        delta: (c12.delta + c23.delta).min(1.0),
        epsilon: c12.epsilon + c23.epsilon,
        noise_dof: c23.noise_dof,
        c1: c12.c1,
        provenance: c12.provenance,
        abstract_sig: c12.abstract_sig,
        concrete_sig: c23.concrete_sig,
    })
}

/// Horizon-accumulated probability slack `γ = 1 − (1−δ)^{N+1}` for a
/// horizon-`N` execution with a δ-lifted initial state.
pub fn gamma_horizon(delta: f64, n: usize) -> f64 {
    1.0 - (1.0 - delta).powi(n as i32 + 1)
}

/// Variant with exponent equal to the number of kernel applications, for
/// point initializations whose initial lifting is exact.
pub fn gamma_horizon_steps(delta: f64, steps: usize) -> f64 {
    1.0 - (1.0 - delta).powi(steps as i32)
}

// ---------------------------------------------------------------------------
// exact-cancellation trade-off (deterministic abstract mean model)
// ---------------------------------------------------------------------------

/// Trade-off for a pair whose interface cancels the deterministic mismatch
/// exactly, leaving the pure output-noise term `G·e` with `G = C·B_w`.
///
/// The certified `δ(ε)` uses the isotropic majorization of the output noise
/// (variance `λ_max(GGᵀ)` on every axis): by Anderson's inequality the exact
/// exceedance of `N(0, GGᵀ)` is dominated, so the certificate is sound. The
/// exact exceedance is exposed through [`case1_delta_pair`].
pub fn case1_exact_cancel_tradeoff(
    concrete: &GaussianLtiGmdp,
    abstract_model: &GaussianLtiGmdp,
    eps_grid: &[f64],
) -> Result<TradeoffCurve> {
    let (lam_max, d) = cancelled_output_noise(concrete, abstract_model)?;
    let mut pts: Vec<(f64, f64)> = eps_grid
        .iter()
        .map(|&e| (iso_exceedance(lam_max, d, e), e))
        .collect();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    TradeoffCurve::new(pts)
}

/// `(certified δ, exact δ)` at one ε for the exact-cancellation pair.
pub fn case1_delta_pair(
    concrete: &GaussianLtiGmdp,
    abstract_model: &GaussianLtiGmdp,
    epsilon: f64,
) -> Result<(f64, f64)> {
    let (lam_max, d) = cancelled_output_noise(concrete, abstract_model)?;
    let g = &concrete.c * &concrete.b_w;
    let exact = crate::coupling::gaussian_ball_exceedance(&(&g * g.transpose()), epsilon)?;
    Ok((iso_exceedance(lam_max, d, epsilon), exact))
}

fn iso_exceedance(lam_max: f64, d: usize, eps: f64) -> f64 {
    if eps <= 0.0 {
        return 1.0;
    }
    if lam_max <= 0.0 {
        return 0.0;
    }
    reg_upper_gamma(d as f64 / 2.0, eps * eps / (2.0 * lam_max))
}

fn cancelled_output_noise(
    concrete: &GaussianLtiGmdp,
    abstract_model: &GaussianLtiGmdp,
) -> Result<(f64, usize)> {
    // the abstract model must be noiseless and the interface must cancel
    if abstract_model.b_w.ncols() > 0 && abstract_model.b_w.norm() > 1e-12 {
        return Err(GmdpError::Infeasible(
            "interface assumption violated: abstract model must be deterministic".into(),
        ));
    }
    let iface = exact_cancel_interface(concrete, abstract_model)?;
    // cancellation residual: the leading-row mismatch must vanish in the
    // concrete state, the abstract state, and the abstract input
    let na = abstract_model.n_states();
    let a_bar = concrete.a.rows(0, na).into_owned();
    let b_top = concrete.b.rows(0, na).into_owned();
    let res_x = &a_bar + &b_top * &iface.k;
    let res_s = &b_top * &iface.q - &b_top * &iface.k * &iface.p - &abstract_model.a;
    let res_u = &b_top * &iface.r - &abstract_model.b;
    if res_x.norm() > 1e-9 || res_s.norm() > 1e-9 || res_u.norm() > 1e-9 {
        return Err(GmdpError::Infeasible(format!(
            "cancellation residual above 1e-9: {:.3e}",
            res_x.norm().max(res_s.norm()).max(res_u.norm())
        )));
    }
    let g = &concrete.c * &concrete.b_w;
    let gg = &g * g.transpose();
    let lam_max = gg.symmetric_eigen().eigenvalues.max();
    Ok((lam_max, concrete.n_outputs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LtiInit;
    use crate::reduction::{ReducedModel, ReductionSource};
    use approx::assert_relative_eq;

    fn lti(a: Mat, b: Mat, bw: Mat, c: Mat) -> GaussianLtiGmdp {
        let n = a.nrows();
        GaussianLtiGmdp::new(a, b, bw, c, LtiInit::Point(Col::zeros(n)), None).unwrap()
    }

    fn scalar_error_system(alpha: f64, beta: f64, rho: f64) -> ErrorSystem {
        ErrorSystem {
            a_bar: Mat::from_row_slice(1, 1, &[alpha]),
            b_bar: Mat::from_row_slice(1, 1, &[beta]),
            r_bar: Mat::from_row_slice(1, 1, &[rho]),
            l_m: Mat::identity(1, 1),
        }
    }

    #[test]
    fn normbound_formula_arithmetic() {
        // α=0.5, β=1, ρ=0, c_w=4  →  ε = 2/(1−0.5) = 4
        let err = scalar_error_system(0.5, 1.0, 0.0);
        let (a, b, r) = err.gains();
        let eps = (b * 4.0_f64.sqrt() + r * 0.0) / (1.0 - a);
        assert_relative_eq!(eps, 4.0);
        // exact matching: β = ρ = 0 → ε(δ) = 0 for all δ
        let exact = scalar_error_system(0.5, 0.0, 0.0);
        let curve = tradeoff_normbound(&exact, &[0.01, 0.1, 0.5], 0.04, 2).unwrap();
        assert!(curve.points.iter().all(|&(_, e)| e == 0.0));
    }

    #[test]
    fn normbound_rejects_expansive_dynamics() {
        let err = scalar_error_system(1.1, 1.0, 0.0);
        assert!(matches!(
            tradeoff_normbound(&err, &[0.1], 0.0, 2),
            Err(GmdpError::NotContractive { .. })
        ));
    }

    #[test]
    fn sproc_never_exceeds_normbound() {
        let err = scalar_error_system(0.6, 0.8, 0.3);
        let deltas = [0.5, 0.1, 0.01];
        let nb = tradeoff_normbound(&err, &deltas, 0.04, 2).unwrap();
        let sp = tradeoff_sprocedure(&err, &deltas, 0.04, 2).unwrap();
        for (a, b) in sp.points.iter().zip(nb.points.iter()) {
            assert!(a.1 <= b.1 + 1e-9, "sproc {} > normbound {}", a.1, b.1);
        }
        // δ-sweep is non-increasing in δ
        for w in sp.points.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-9);
        }
    }

    #[test]
    fn sproc_certificates_survive_sampling() {
        let err = ErrorSystem {
            a_bar: Mat::from_row_slice(2, 2, &[0.6, 0.1, 0.0, 0.5]),
            b_bar: Mat::from_row_slice(2, 2, &[0.2, 0.0, 0.1, 0.1]),
            r_bar: Mat::from_row_slice(2, 1, &[0.3, 0.0]),
            l_m: Mat::identity(2, 2),
        };
        let c_w = chi_square_inv(2, 0.99).unwrap();
        let eps = sproc_epsilon(&err, c_w, 0.04).unwrap();
        assert!(certify_by_sampling(&err, eps, c_w, 0.04, 100_000, 7).is_ok());
        // halving ε must produce a counterexample
        match certify_by_sampling(&err, eps / 2.0, c_w, 0.04, 100_000, 7) {
            CertifyOutcome::Counterexample { error_norm, epsilon, .. } => {
                assert!(error_norm > epsilon);
            }
            CertifyOutcome::Ok => panic!("halved ε must be falsified"),
        }
    }

    #[test]
    fn zero_noise_pair_certifies_at_zero_epsilon() {
        let err = scalar_error_system(0.5, 0.0, 0.0);
        assert!(certify_by_sampling(&err, 0.0, 0.0, 0.0, 1000, 1).is_ok());
    }

    #[test]
    fn default_relation_matrix_cases() {
        // A+BK = 0 → M = CᵀC + λI
        let a = Mat::zeros(2, 2);
        let b = Mat::identity(2, 2);
        let k = Mat::zeros(2, 2);
        let c = Mat::from_row_slice(1, 2, &[1.0, 0.0]);
        let m = default_relation_matrix(&a, &b, &k, &c, 0.5).unwrap();
        assert_relative_eq!(m, c.transpose() * &c + Mat::identity(2, 2) * 0.5, epsilon = 1e-12);

        // scalar closed loop 0.5, c = 1, λ = 0 → M = 4/3
        let m = default_relation_matrix(
            &Mat::from_row_slice(1, 1, &[0.5]),
            &Mat::zeros(1, 1),
            &Mat::zeros(1, 1),
            &Mat::identity(1, 1),
            0.0,
        )
        .unwrap();
        assert_relative_eq!(m[(0, 0)], 4.0 / 3.0, epsilon = 1e-10);
    }

    #[test]
    fn self_abstraction_interface_is_identity_shaped() {
        let a = Mat::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.4]);
        let b = Mat::from_row_slice(2, 1, &[1.0, 0.3]);
        let bw = Mat::from_row_slice(2, 1, &[0.1, 0.2]);
        let c = Mat::from_row_slice(1, 2, &[1.0, 1.0]);
        let m = lti(a, b, bw, c);
        let red = ReducedModel {
            model: m.clone(),
            hankel_values: vec![],
            source: ReductionSource::Plain,
        };
        let iface = synthesize_interface(&m, &red, None).unwrap();
        assert_relative_eq!(iface.p, Mat::identity(2, 2), epsilon = 1e-6);
        assert!(iface.q.norm() < 1e-6);
        assert_relative_eq!(iface.r[(0, 0)], 1.0, epsilon = 1e-6);
        assert!(spectral_radius(&(&m.a + &m.b * &iface.k)) < 1.0);
    }

    #[test]
    fn feedback_pair_interface_recovers_gain() {
        // abstract: x' = (A+BK̂)x + Bu, concrete: x' = Ax + Bu, diagonal relation
        let a = Mat::from_row_slice(2, 2, &[0.7, 0.2, 0.0, 0.6]);
        let b = Mat::from_row_slice(2, 1, &[1.0, 0.5]);
        let khat = Mat::from_row_slice(1, 2, &[-0.2, -0.1]);
        let bw = Mat::from_row_slice(2, 1, &[0.1, 0.1]);
        let c = Mat::from_row_slice(1, 2, &[1.0, 0.0]);
        let concrete = lti(a.clone(), b.clone(), bw.clone(), c.clone());
        let abstract_m = lti(&a + &b * &khat, b.clone(), bw, c);
        let red = ReducedModel {
            model: abstract_m,
            hankel_values: vec![],
            source: ReductionSource::Plain,
        };
        let iface = synthesize_interface(&concrete, &red, None).unwrap();
        assert_relative_eq!(iface.p, Mat::identity(2, 2), epsilon = 1e-6);
        assert_relative_eq!(iface.q, khat, epsilon = 1e-6);
    }

    #[test]
    fn office_interface_synthesis_with_reference_gain() {
        // supplying the reference K, the synthesized P, Q satisfy the
        // model-matching equations (residuals checked inside the solver)
        let office = crate::casedata::office_full();
        let reduced = ReducedModel {
            model: crate::casedata::office_reduced_reference(),
            hankel_values: vec![],
            source: ReductionSource::Plain,
        };
        let reference = crate::casedata::office_reference();
        let iface = synthesize_interface(&office, &reduced, Some(reference.k.clone())).unwrap();
        let res_dyn = (&iface.p * &reduced.model.a - &office.a * &iface.p - &office.b * &iface.q).norm();
        let res_out = (&office.c * &iface.p - &reduced.model.c).norm();
        assert!(res_dyn < 1e-8, "dynamics residual {res_dyn:.3e}");
        assert!(res_out < 1e-8, "output residual {res_out:.3e}");
        assert!(spectral_radius(&(&office.a + &office.b * &iface.k)) < 1.0);
    }

    #[test]
    fn office_default_relation_matrix_invariants() {
        let office = crate::casedata::office_full();
        let reference = crate::casedata::office_reference();
        let m = default_relation_matrix(&office.a, &office.b, &reference.k, &office.c, 1e-6).unwrap();
        let m_eigs = m.clone().symmetric_eigen().eigenvalues;
        assert!(m_eigs.min() > 0.0, "M must be positive definite");
        let gap = (&m - office.c.transpose() * &office.c).symmetric_eigen().eigenvalues;
        assert!(gap.min() >= -1e-9, "M − CᵀC must be PSD");
        // the returned M makes the closed loop an M-norm contraction
        let l = chol_upper(&m).unwrap();
        let acl = &office.a + &office.b * &reference.k;
        let alpha = spectral_norm(&(&l * acl * l.try_inverse().unwrap()));
        assert!(alpha < 1.0, "contraction factor {alpha}");
    }

    #[test]
    fn shared_noise_certificate_formula_and_simulation() {
        assert_eq!(analytic_shared_noise_relation(0.5, 2.0, 0.0).unwrap().epsilon, 0.0);
        let cert = analytic_shared_noise_relation(0.5, 2.0, 1.0).unwrap();
        assert_relative_eq!(cert.epsilon, 4.0);
        match cert.relation {
            RelationKind::Ball { radius, .. } => assert_relative_eq!(radius, 2.0),
            _ => panic!(),
        }
        assert!(analytic_shared_noise_relation(1.0, 1.0, 1.0).is_err());

        // simulation oracle of the induction argument: contractive pair with
        // shared noise never exits the ball
        use rand::Rng;
        let mut rng = crate::rng::SeedStream::new(2).stream(0);
        let l = 0.8;
        let c = 0.3;
        let radius = c / (1.0 - l);
        let mut x1 = 0.0_f64;
        let mut x2 = 0.05_f64;
        for _ in 0..10_000 {
            let shared: f64 = rng.random_range(-1.0..1.0);
            let disperse: f64 = rng.random_range(-c..c);
            x1 = l * x1 + shared;
            x2 = l * x2 + shared + disperse;
            assert!((x1 - x2).abs() <= radius + 1e-12);
        }
    }

    #[test]
    fn composition_is_additive_and_checks_chain() {
        let base = analytic_shared_noise_relation(0.5, 1.0, 0.5).unwrap();
        let mut trunc = base.clone();
        trunc.delta = 0.05;
        trunc.epsilon = 0.0;
        trunc.abstract_sig = 1;
        trunc.concrete_sig = 2;
        let mut noiseless = base.clone();
        noiseless.delta = 0.0;
        noiseless.epsilon = 0.7;
        noiseless.abstract_sig = 2;
        noiseless.concrete_sig = 3;
        let comp = compose_transitive(&trunc, &noiseless).unwrap();
        assert_relative_eq!(comp.delta, 0.05);
        assert_relative_eq!(comp.epsilon, 0.7);

        let exact = SimRelCertificate { delta: 0.0, epsilon: 0.0, abstract_sig: 3, concrete_sig: 4, ..base.clone() };
        let comp2 = compose_transitive(&comp, &exact).unwrap();
        assert_relative_eq!(comp2.delta, comp.delta);
        assert_relative_eq!(comp2.epsilon, comp.epsilon);

        let broken = SimRelCertificate { abstract_sig: 99, ..exact };
        assert!(matches!(
            compose_transitive(&comp, &broken),
            Err(GmdpError::MiddleModelMismatch(_))
        ));
    }

    #[test]
    fn gamma_horizon_values() {
        assert_eq!(gamma_horizon(0.0, 10), 0.0);
        assert_relative_eq!(gamma_horizon_steps(0.01, 6), 0.058519850599, epsilon = 1e-9);
        // union bound with equality at δ = 0
        for &d in &[0.0, 0.01, 0.1] {
            for n in 0..5 {
                assert!(gamma_horizon(d, n) <= (n as f64 + 1.0) * d + 1e-12);
            }
        }
    }

    #[test]
    fn exact_cancel_tradeoff_two_zone_values() {
        let c = crate::casedata::two_zone_concrete();
        let a = crate::casedata::two_zone_abstract();
        let (d_cert, d_exact) = case1_delta_pair(&c, &a, 0.16).unwrap();
        // certified value is the isotropic majorization exp(−ε²/(2λ_max))
        assert_relative_eq!(d_cert, (-0.16_f64.powi(2) / (2.0 * 0.0049)).exp(), epsilon = 1e-12);
        assert_relative_eq!(d_cert, 0.0733696513683829, epsilon = 1e-9);
        // exact exceedance of the anisotropic output noise, frozen from two
        // independent oracles (nested quadrature and 10⁷-sample Monte Carlo)
        assert_relative_eq!(d_exact, 0.02510489, epsilon = 1e-5);
        assert!(d_exact <= d_cert);

        let curve = case1_exact_cancel_tradeoff(&c, &a, &[0.0, 0.16, 2.0]).unwrap();
        let eps_of: Vec<f64> = curve.points.iter().map(|p| p.1).collect();
        let del_of: Vec<f64> = curve.points.iter().map(|p| p.0).collect();
        // δ → 1 as ε → 0 and δ → 0 as ε grows
        assert_eq!(del_of[eps_of.iter().position(|&e| e == 0.0).unwrap()], 1.0);
        assert!(del_of[eps_of.iter().position(|&e| e == 2.0).unwrap()] < 1e-12);
    }

    #[test]
    fn tradeoff_curve_rejects_non_monotone() {
        assert!(TradeoffCurve::new(vec![(0.1, 1.0), (0.2, 2.0)]).is_err());
        assert!(TradeoffCurve::new(vec![(0.1, 2.0), (0.2, 1.0)]).is_ok());
    }
}
