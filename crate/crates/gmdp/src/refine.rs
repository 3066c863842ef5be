//! Controller refinement: executing an abstract strategy on the concrete
//! model through the interface, with the abstract state advanced by the
//! conditional lifting, and recovery handling once the state pair exits the
//! relation.
//!
//! The conditional lifting is available in two forms: shared-noise LTI
//! liftings (the conditional is a point mass obtained by reconstructing the
//! noise from the observed concrete transition) and finite LP couplings (the
//! conditional is the normalized coupling column).

use crate::coupling::min_delta_lifting;
use crate::error::{GmdpError, Result};
use crate::linalg::{pinv, Col, Mat};
use crate::model::{
    sample_categorical, FiniteGmdp, GaussianLtiGmdp, InputPoint, StatePoint, Strategy,
};
use crate::rng::StreamRng;
use crate::simrel::{InterfaceKind, LtiInterface, QuadraticRelation, RelationKind};

/// Operating mode of a refined strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Refine,
    Recover,
}

/// What to do once the state pair leaves the relation.
#[derive(Clone)]
pub enum RecoveryPolicy {
    /// Reset the abstract state to the closest related point and continue
    /// refining (the re-entering variant).
    ResetAbstract,
    /// Switch permanently to a constant input.
    HoldInput(InputPoint),
    /// Switch permanently to a caller-supplied strategy.
    Custom(Box<dyn Strategy>),
}

impl std::fmt::Debug for RecoveryPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RecoveryPolicy::ResetAbstract => write!(f, "ResetAbstract"),
            RecoveryPolicy::HoldInput(u) => write!(f, "HoldInput({u:?})"),
            RecoveryPolicy::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Shared-noise lifting between a concrete and an abstract LTI model: the
/// abstract successor is the image of the reconstructed concrete noise.
#[derive(Debug, Clone)]
pub struct SharedNoiseLifting {
    pub a: Mat,
    pub b: Mat,
    pub b_w: Mat,
    b_w_pinv: Mat,
    pub a_i: Mat,
    pub b_i: Mat,
    pub b_wi: Mat,
}

impl SharedNoiseLifting {
    pub fn new(concrete: &GaussianLtiGmdp, abstract_model: &GaussianLtiGmdp) -> Result<Self> {
        if concrete.n_noise() != abstract_model.n_noise() {
            return Err(GmdpError::NotReconstructible(
                "shared-noise lifting needs matching noise dimensions".into(),
            ));
        }
        Ok(Self {
            a: concrete.a.clone(),
            b: concrete.b.clone(),
            b_w: concrete.b_w.clone(),
            b_w_pinv: pinv(&concrete.b_w, 1e-12),
            a_i: abstract_model.a.clone(),
            b_i: abstract_model.b.clone(),
            b_wi: abstract_model.b_w.clone(),
        })
    }

    /// Reconstruct the noise realization from the observed transition.
    pub fn reconstruct_noise(&self, x2: &Col, u2: &Col, x2_next: &Col) -> Result<Col> {
        let resid_vec = x2_next - &self.a * x2 - &self.b * u2;
        let w = &self.b_w_pinv * &resid_vec;
        let reconstruction_gap = (&self.b_w * &w - &resid_vec).norm();
        if reconstruction_gap > 1e-9 * resid_vec.norm().max(1.0) {
            return Err(GmdpError::NotReconstructible(format!(
                "noise reconstruction residual {reconstruction_gap:.3e}"
            )));
        }
        Ok(w)
    }
}

/// Finite LP lifting: couplings are solved on demand for the kernel rows of
/// the acting state/input pair.
#[derive(Debug, Clone)]
pub struct FiniteLpLifting {
    pub t1: Vec<Mat>,
    pub t2: Vec<Mat>,
    pub mask: Vec<Vec<bool>>,
    pub interface_map: Vec<Vec<Vec<usize>>>,
    pub pi1: Col,
    pub pi2: Col,
}

/// Conditional-sampling form of the lifting kernel.
#[derive(Debug, Clone)]
pub enum LiftingKernel {
    SharedNoiseLti(SharedNoiseLifting),
    FiniteLp(FiniteLpLifting),
}

/// Everything a refined strategy needs from the certificate.
#[derive(Debug, Clone)]
pub struct RefinementAssets {
    pub interface: InterfaceKind,
    pub relation: RelationKind,
    pub lifting: LiftingKernel,
    pub delta: f64,
}

/// Draw (or reconstruct) the abstract successor from the lifting conditional
/// on the observed concrete transition.
pub fn conditional_abstract_update(
    lifting: &LiftingKernel,
    x1: &StatePoint,
    u1: &InputPoint,
    x2: &StatePoint,
    u2: &InputPoint,
    x2_next: &StatePoint,
    rng: &mut StreamRng,
) -> Result<StatePoint> {
    match lifting {
        LiftingKernel::SharedNoiseLti(l) => {
            let w = l.reconstruct_noise(x2.as_vector()?, u2.as_vector()?, x2_next.as_vector()?)?;
            Ok(StatePoint::Vector(
                &l.a_i * x1.as_vector()? + &l.b_i * u1.as_vector()? + &l.b_wi * w,
            ))
        }
        LiftingKernel::FiniteLp(l) => {
            let (x1i, u1i, x2i, u2i, x2n) = (
                x1.as_finite()?,
                u1.as_finite()?,
                x2.as_finite()?,
                u2.as_finite()?,
                x2_next.as_finite()?,
            );
            let row1 = l.t1[u1i].row(x1i).transpose();
            let row2 = l.t2[u2i].row(x2i).transpose();
            let coupling = min_delta_lifting(&row1, &row2, &l.mask)?;
            let cond = coupling.conditional_given_col(x2n).ok_or_else(|| {
                GmdpError::NotReconstructible(format!(
                    "observed successor {x2n} has zero probability under the coupling"
                ))
            })?;
            Ok(StatePoint::Finite(sample_categorical(&cond, rng)))
        }
    }
}

/// Closest related abstract state for a concrete state. Returns the state,
/// the achieved quadratic form value (or squared distance), and whether the
/// pair lies in the relation.
pub fn reset_abstract(relation: &RelationKind, x2: &StatePoint) -> Result<(StatePoint, f64, bool)> {
    match relation {
        RelationKind::Quadratic(q) => {
            let x2v = x2.as_vector()?;
            let (x1, val) = reset_abstract_quadratic(q, x2v)?;
            let ok = val <= q.epsilon * q.epsilon;
            Ok((StatePoint::Vector(x1), val, ok))
        }
        RelationKind::Ball { proj, .. } => {
            let x2v = x2.as_vector()?;
            let x1 = match proj {
                Some(p) => p * x2v,
                None => x2v.clone(),
            };
            Ok((StatePoint::Vector(x1), 0.0, true))
        }
        RelationKind::FiniteMask(mask) => {
            let x2i = x2.as_finite()?;
            for (x1, row) in mask.iter().enumerate() {
                if row[x2i] {
                    return Ok((StatePoint::Finite(x1), 0.0, true));
                }
            }
            Ok((StatePoint::Finite(0), f64::INFINITY, false))
        }
        RelationKind::Composed(_, _) => Err(GmdpError::InvalidArgument(
            "reset is not defined for composed relations".into(),
        )),
    }
}

/// Minimizer of `(x₂ − P·x₁)ᵀ M (x₂ − P·x₁)` over `x₁`:
/// `x₁ = (PᵀMP)⁻¹ PᵀM x₂`, with the achieved form value.
pub fn reset_abstract_quadratic(q: &QuadraticRelation, x2: &Col) -> Result<(Col, f64)> {
    let ptmp = q.p.transpose() * &q.m * &q.p;
    let inv = ptmp
        .try_inverse()
        .ok_or_else(|| GmdpError::InvalidArgument("PᵀMP singular; reset undefined".into()))?;
    let x1 = inv * q.p.transpose() * &q.m * x2;
    let val = q.form_value(x2, &x1);
    Ok((x1, val))
}

/// Per-execution bookkeeping of a refined strategy.
#[derive(Debug, Clone, Default)]
pub struct RefinementLog {
    /// Tracked abstract state at each time step (post update, pre reset).
    pub abstract_states: Vec<StatePoint>,
    /// Relation membership of the pair at each time step.
    pub in_relation: Vec<bool>,
    /// Operating mode at each time step.
    pub modes: Vec<Mode>,
    pub exit_count: usize,
    pub first_exit: Option<usize>,
    pub resets: usize,
    pub unrecoverable: usize,
    /// Lookup strategies count out-of-grid states here.
    pub out_of_grid: usize,
}

/// Refined control strategy (Algorithm-style refine/recover executor).
#[derive(Clone)]
pub struct RefinedStrategy {
    abstract_strategy: Box<dyn Strategy>,
    assets: RefinementAssets,
    recovery: RecoveryPolicy,
    mode: Mode,
    x1: Option<StatePoint>,
    pending: Option<(InputPoint, InputPoint, StatePoint)>,
    log: RefinementLog,
}

impl RefinedStrategy {
    pub fn assets(&self) -> &RefinementAssets {
        &self.assets
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    fn apply_interface(&self, u1: &InputPoint, x1: &StatePoint, x2: &StatePoint) -> Result<InputPoint> {
        apply_interface(&self.assets.interface, u1, x1, x2)
    }

    fn membership(&self, x1: &StatePoint, x2: &StatePoint) -> Result<bool> {
        membership(&self.assets.relation, x1, x2)
    }

    fn initialize_abstract(&mut self, x2: &StatePoint, rng: &mut StreamRng) -> Result<()> {
        let x1 = match &self.assets.lifting {
            LiftingKernel::FiniteLp(l) => {
                let coupling = min_delta_lifting(&l.pi1, &l.pi2, &l.mask)?;
                let cond = coupling.conditional_given_col(x2.as_finite()?).ok_or_else(|| {
                    GmdpError::NotReconstructible("initial state has zero probability".into())
                })?;
                StatePoint::Finite(sample_categorical(&cond, rng))
            }
            LiftingKernel::SharedNoiseLti(_) => {
                let (x1, _, ok) = reset_abstract(&self.assets.relation, x2)?;
                if !ok {
                    return Err(GmdpError::Infeasible(
                        "initial concrete state cannot be lifted into the relation".into(),
                    ));
                }
                x1
            }
        };
        let in_rel = self.membership(&x1, x2)?;
        self.log.abstract_states.push(x1.clone());
        self.log.in_relation.push(in_rel);
        self.log.modes.push(self.mode);
        if !in_rel {
            self.register_exit(0, x2)?;
        }
        self.x1 = Some(x1);
        Ok(())
    }

    fn register_exit(&mut self, t: usize, x2: &StatePoint) -> Result<()> {
        self.log.exit_count += 1;
        if self.log.first_exit.is_none() {
            self.log.first_exit = Some(t);
        }
        match &self.recovery {
            RecoveryPolicy::ResetAbstract => {
                let (x1r, _, ok) = reset_abstract(&self.assets.relation, x2)?;
                self.log.resets += 1;
                if !ok {
                    self.log.unrecoverable += 1;
                }
                self.x1 = Some(x1r);
            }
            RecoveryPolicy::HoldInput(_) | RecoveryPolicy::Custom(_) => {
                self.mode = Mode::Recover;
            }
        }
        Ok(())
    }
}

impl Strategy for RefinedStrategy {
    fn reset(&mut self) {
        self.abstract_strategy.reset();
        if let RecoveryPolicy::Custom(s) = &mut self.recovery {
            s.reset();
        }
        self.mode = Mode::Refine;
        self.x1 = None;
        self.pending = None;
        self.log = RefinementLog::default();
    }

    fn input_for(&mut self, t: usize, x2: &StatePoint, rng: &mut StreamRng) -> Result<InputPoint> {
        if self.x1.is_none() {
            self.initialize_abstract(x2, rng)?;
        }
        match self.mode {
            Mode::Refine => {
                let x1 = self.x1.clone().unwrap();
                let u1 = self.abstract_strategy.input_for(t, &x1, rng)?;
                let u2 = self.apply_interface(&u1, &x1, x2)?;
                self.pending = Some((u1, u2.clone(), x2.clone()));
                Ok(u2)
            }
            Mode::Recover => match &mut self.recovery {
                RecoveryPolicy::HoldInput(u) => Ok(u.clone()),
                RecoveryPolicy::Custom(s) => s.input_for(t, x2, rng),
                RecoveryPolicy::ResetAbstract => unreachable!("reset recovery stays in refine mode"),
            },
        }
    }

    fn observe(&mut self, t: usize, x2_next: &StatePoint, rng: &mut StreamRng) {
        if self.mode == Mode::Recover {
            self.log.abstract_states.push(self.x1.clone().unwrap());
            self.log.in_relation.push(false);
            self.log.modes.push(Mode::Recover);
            return;
        }
        let Some((u1, u2, x2_prev)) = self.pending.take() else { return };
        let x1 = self.x1.clone().unwrap();
        let x1_next = match conditional_abstract_update(
            &self.assets.lifting,
            &x1,
            &u1,
            &x2_prev,
            &u2,
            x2_next,
            rng,
        ) {
            Ok(x) => x,
            Err(_) => x1.clone(), // reconstruction failure: keep the old state, count as exit
        };
        let in_rel = self.membership(&x1_next, x2_next).unwrap_or(false);
        self.log.abstract_states.push(x1_next.clone());
        self.log.in_relation.push(in_rel);
        self.log.modes.push(self.mode);
        self.x1 = Some(x1_next);
        if !in_rel {
            let _ = self.register_exit(t, x2_next);
        }
    }

    fn horizon(&self) -> Option<usize> {
        self.abstract_strategy.horizon()
    }

    fn box_clone(&self) -> Box<dyn Strategy> {
        Box::new(self.clone())
    }

    fn refinement_log(&self) -> Option<&RefinementLog> {
        Some(&self.log)
    }
}

/// Interface application shared by the refined strategy and the exact
/// enumeration harness.
pub fn apply_interface(
    interface: &InterfaceKind,
    u1: &InputPoint,
    x1: &StatePoint,
    x2: &StatePoint,
) -> Result<InputPoint> {
    match interface {
        InterfaceKind::Identity => Ok(u1.clone()),
        InterfaceKind::Lti(LtiInterface { r, q, k, p }) => {
            let (u1v, x1v, x2v) = (u1.as_vector()?, x1.as_vector()?, x2.as_vector()?);
            Ok(InputPoint::Vector(r * u1v + q * x1v + k * (x2v - p * x1v)))
        }
        InterfaceKind::FiniteMap(table) => {
            Ok(InputPoint::Finite(table[u1.as_finite()?][x1.as_finite()?][x2.as_finite()?]))
        }
        InterfaceKind::Composed(first, second) => {
            // u2 = first(u1, x1, x_mid) then u3 = second(u2, x_mid, x3); the
            // middle state is not tracked by composed certificates
            let _ = (first, second);
            Err(GmdpError::InvalidArgument(
                "composed interfaces cannot be executed without the middle model state".into(),
            ))
        }
    }
}

/// Relation membership shared by the refined strategy and the harnesses.
pub fn membership(relation: &RelationKind, x1: &StatePoint, x2: &StatePoint) -> Result<bool> {
    Ok(match (relation, x1, x2) {
        (RelationKind::FiniteMask(_), StatePoint::Finite(a), StatePoint::Finite(b)) => {
            relation.contains_finite(*a, *b)
        }
        (_, StatePoint::Vector(a), StatePoint::Vector(b)) => relation.contains_vectors(a, b),
        _ => {
            return Err(GmdpError::InvalidArgument(
                "state kinds do not match the relation".into(),
            ))
        }
    })
}

/// Exact refinement: requires an exact certificate (`δ = 0`).
pub fn refine_exact(
    abstract_strategy: Box<dyn Strategy>,
    assets: RefinementAssets,
) -> Result<RefinedStrategy> {
    if assets.delta > 1e-12 {
        return Err(GmdpError::InvalidArgument(format!(
            "exact refinement needs δ = 0, certificate has δ = {}",
            assets.delta
        )));
    }
    Ok(RefinedStrategy {
        abstract_strategy,
        assets,
        recovery: RecoveryPolicy::ResetAbstract,
        mode: Mode::Refine,
        x1: None,
        pending: None,
        log: RefinementLog::default(),
    })
}

/// Approximate refinement with a recovery policy.
pub fn refine_approx(
    abstract_strategy: Box<dyn Strategy>,
    assets: RefinementAssets,
    recovery: RecoveryPolicy,
) -> Result<RefinedStrategy> {
    Ok(RefinedStrategy {
        abstract_strategy,
        assets,
        recovery,
        mode: Mode::Refine,
        x1: None,
        pending: None,
        log: RefinementLog::default(),
    })
}

/// Certified `(δ, ε)` of a finite pair under a relation mask and interface:
/// δ is the worst LP lifting over related pairs and inputs (and the initial
/// lifting), ε the worst output distance over related pairs.
pub fn certify_finite_pair(
    m1: &FiniteGmdp,
    m2: &FiniteGmdp,
    mask: &[Vec<bool>],
    interface_map: &[Vec<Vec<usize>>],
) -> Result<(f64, f64)> {
    let mut delta: f64 = min_delta_lifting(&m1.init, &m2.init, mask)?.delta;
    let mut epsilon: f64 = 0.0;
    for x1 in 0..m1.n_states() {
        for x2 in 0..m2.n_states() {
            if !mask[x1][x2] {
                continue;
            }
            epsilon = epsilon.max(m1.metric.distance(&m1.outputs[x1], &m2.outputs[x2]));
            for u1 in 0..m1.n_actions() {
                let u2 = interface_map[u1][x1][x2];
                let row1 = m1.t_row(x1, u1);
                let row2 = m2.t_row(x2, u2);
                delta = delta.max(min_delta_lifting(&row1, &row2, mask)?.delta);
            }
        }
    }
    Ok((delta, epsilon))
}

impl FiniteGmdp {
    fn t_row(&self, x: usize, u: usize) -> Col {
        self.kernel[u].row(x).transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        execute_controlled, FnStrategy, LtiInit, ModelRef, OutputMetric, Output,
    };
    use approx::assert_relative_eq;

    fn simple_lti(a: f64, bw: f64) -> GaussianLtiGmdp {
        GaussianLtiGmdp::new(
            Mat::from_row_slice(1, 1, &[a]),
            Mat::from_row_slice(1, 1, &[1.0]),
            Mat::from_row_slice(1, 1, &[bw]),
            Mat::identity(1, 1),
            LtiInit::Point(Col::zeros(1)),
            None,
        )
        .unwrap()
    }

    #[test]
    fn identity_noise_matrix_reconstructs_exactly() {
        let m = GaussianLtiGmdp::new(
            Mat::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.4]),
            Mat::from_row_slice(2, 1, &[1.0, 0.0]),
            Mat::identity(2, 2),
            Mat::identity(2, 2),
            LtiInit::Point(Col::zeros(2)),
            None,
        )
        .unwrap();
        let l = SharedNoiseLifting::new(&m, &m).unwrap();
        let x2 = Col::from_row_slice(&[1.0, -0.5]);
        let u2 = Col::from_row_slice(&[0.3]);
        let w_true = Col::from_row_slice(&[0.7, -0.2]);
        let x2n = &m.a * &x2 + &m.b * &u2 + &m.b_w * &w_true;
        let w = l.reconstruct_noise(&x2, &u2, &x2n).unwrap();
        assert_relative_eq!(w, w_true, epsilon = 1e-12);
    }

    #[test]
    fn rank_deficient_noise_with_off_range_residual_errors() {
        let m = GaussianLtiGmdp::new(
            Mat::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.4]),
            Mat::from_row_slice(2, 1, &[1.0, 0.0]),
            Mat::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]),
            Mat::identity(2, 2),
            LtiInit::Point(Col::zeros(2)),
            None,
        )
        .unwrap();
        let l = SharedNoiseLifting::new(&m, &m).unwrap();
        let x2 = Col::zeros(2);
        let u2 = Col::zeros(1);
        // residual (1, -1) is orthogonal to the rank-one column space
        let x2n = Col::from_row_slice(&[1.0, -1.0]);
        assert!(matches!(
            l.reconstruct_noise(&x2, &u2, &x2n),
            Err(GmdpError::NotReconstructible(_))
        ));
    }

    #[test]
    fn self_abstraction_update_reproduces_concrete_state() {
        let m = simple_lti(0.5, 0.3);
        let l = SharedNoiseLifting::new(&m, &m).unwrap();
        let lifting = LiftingKernel::SharedNoiseLti(l);
        let mut rng = crate::rng::SeedStream::new(0).stream(0);
        let x = StatePoint::Vector(Col::from_row_slice(&[0.4]));
        let u = InputPoint::Vector(Col::from_row_slice(&[0.1]));
        let xn = StatePoint::Vector(Col::from_row_slice(&[0.9]));
        let x1n = conditional_abstract_update(&lifting, &x, &u, &x, &u, &xn, &mut rng).unwrap();
        assert_relative_eq!(x1n.as_vector().unwrap(), xn.as_vector().unwrap(), epsilon = 1e-10);
    }

    #[test]
    fn identity_pair_refined_trace_equals_abstract_trace() {
        let m = simple_lti(0.6, 0.2);
        let assets = RefinementAssets {
            interface: InterfaceKind::Identity,
            relation: RelationKind::Ball { radius: 1e-9, proj: None },
            lifting: LiftingKernel::SharedNoiseLti(SharedNoiseLifting::new(&m, &m).unwrap()),
            delta: 0.0,
        };
        let policy = FnStrategy::new(|_, _| InputPoint::Vector(Col::from_row_slice(&[0.05])));
        let mut refined = refine_exact(Box::new(policy.clone()), assets).unwrap();
        let tr_refined = execute_controlled(ModelRef::Lti(&m), &mut refined, 20, 33).unwrap();
        let mut plain = policy;
        let tr_plain = execute_controlled(ModelRef::Lti(&m), &mut plain, 20, 33).unwrap();
        for (a, b) in tr_refined.states.iter().zip(tr_plain.states.iter()) {
            assert_relative_eq!(a.as_vector().unwrap(), b.as_vector().unwrap(), epsilon = 1e-12);
        }
        // tracked abstract state equals the concrete state throughout
        let log = tr_refined.refinement.unwrap();
        assert_eq!(log.exit_count, 0);
        for (xa, xc) in log.abstract_states.iter().zip(tr_refined.states.iter()) {
            assert_relative_eq!(xa.as_vector().unwrap(), xc.as_vector().unwrap(), epsilon = 1e-9);
        }
    }

    #[test]
    fn exact_refinement_requires_zero_delta() {
        let m = simple_lti(0.6, 0.2);
        let assets = RefinementAssets {
            interface: InterfaceKind::Identity,
            relation: RelationKind::Ball { radius: 1.0, proj: None },
            lifting: LiftingKernel::SharedNoiseLti(SharedNoiseLifting::new(&m, &m).unwrap()),
            delta: 0.1,
        };
        assert!(refine_exact(Box::new(FnStrategy::new(|_, _| InputPoint::Vector(Col::zeros(1)))), assets).is_err());
    }

    #[test]
    fn reset_abstract_identity_case() {
        let rel = RelationKind::Quadratic(QuadraticRelation {
            m: Mat::identity(2, 2),
            p: Mat::identity(2, 2),
            epsilon: 0.5,
        });
        let x2 = StatePoint::Vector(Col::from_row_slice(&[0.3, -0.1]));
        let (x1, val, ok) = reset_abstract(&rel, &x2).unwrap();
        assert_relative_eq!(x1.as_vector().unwrap(), x2.as_vector().unwrap(), epsilon = 1e-12);
        assert!(val.abs() < 1e-12);
        assert!(ok);
    }

    #[test]
    fn reset_abstract_exact_projection_case() {
        // x2 = P x_s for some x_s: reset returns that x_s with form value 0
        let p = Mat::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.5, 0.5]);
        let rel = QuadraticRelation { m: Mat::identity(3, 3), p: p.clone(), epsilon: 0.4 };
        let xs = Col::from_row_slice(&[0.2, -0.7]);
        let x2 = &p * &xs;
        let (x1, val) = reset_abstract_quadratic(&rel, &x2).unwrap();
        assert_relative_eq!(x1, xs, epsilon = 1e-10);
        assert!(val.abs() < 1e-12);
    }

    #[test]
    fn reset_abstract_beats_random_candidates() {
        use rand::Rng;
        let mut rng = crate::rng::SeedStream::new(9).stream(0);
        let p = Mat::from_fn(4, 2, |_, _| rng.random_range(-1.0..1.0));
        let raw = Mat::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let m = &raw * raw.transpose() + Mat::identity(4, 4) * 0.1;
        let rel = QuadraticRelation { m, p, epsilon: 1.0 };
        for _ in 0..10 {
            let x2 = Col::from_fn(4, |_, _| rng.random_range(-2.0..2.0));
            let (_, best) = reset_abstract_quadratic(&rel, &x2).unwrap();
            for _ in 0..1000 {
                let cand = Col::from_fn(2, |_, _| rng.random_range(-4.0..4.0));
                assert!(rel.form_value(&x2, &cand) >= best - 1e-9);
            }
        }
    }

    #[test]
    fn hold_input_recovery_is_monotone() {
        // tight relation forces an exit quickly; mode must switch and stay
        let m = simple_lti(0.5, 1.0);
        let abstract_m = GaussianLtiGmdp::new(
            Mat::from_row_slice(1, 1, &[0.5]),
            Mat::from_row_slice(1, 1, &[1.0]),
            Mat::zeros(1, 1),
            Mat::identity(1, 1),
            LtiInit::Point(Col::zeros(1)),
            None,
        )
        .unwrap();
        let assets = RefinementAssets {
            interface: InterfaceKind::Identity,
            relation: RelationKind::Ball { radius: 0.05, proj: None },
            lifting: LiftingKernel::SharedNoiseLti(
                SharedNoiseLifting::new(&m, &abstract_m).unwrap(),
            ),
            delta: 0.9,
        };
        let policy = FnStrategy::new(|_, _| InputPoint::Vector(Col::zeros(1)));
        let mut refined = refine_approx(
            Box::new(policy),
            assets,
            RecoveryPolicy::HoldInput(InputPoint::Vector(Col::zeros(1))),
        )
        .unwrap();
        let tr = execute_controlled(ModelRef::Lti(&m), &mut refined, 40, 5).unwrap();
        let log = tr.refinement.unwrap();
        assert!(log.exit_count >= 1);
        let first_recover = log.modes.iter().position(|m| *m == Mode::Recover);
        if let Some(k) = first_recover {
            assert!(log.modes[k..].iter().all(|m| *m == Mode::Recover));
        }
    }

    #[test]
    fn variance_split_refinement_matches_moments() {
        // abstract model with the full noise variance vs concrete model with
        // a smaller noise plus a randomized input channel carrying the
        // variance remainder: the two controlled output laws coincide, so
        // empirical mean and covariance of the outputs must match within
        // Monte-Carlo confidence
        let a = Mat::from_row_slice(1, 1, &[0.7]);
        let b = Mat::from_row_slice(1, 1, &[1.0]);
        let sigma_full = 0.5_f64;
        let sigma_small = 0.3_f64;
        let extra = (sigma_full * sigma_full - sigma_small * sigma_small).sqrt();
        let m1 = GaussianLtiGmdp::new(
            a.clone(),
            b.clone(),
            Mat::from_row_slice(1, 1, &[sigma_full]),
            Mat::identity(1, 1),
            LtiInit::Point(Col::zeros(1)),
            None,
        )
        .unwrap();
        // the randomized interface noise folded into the concrete model's
        // noise channels: x⁺ = a·x + u + σ̃·w₁ + extra·w₂
        let m2 = GaussianLtiGmdp::new(
            a,
            b,
            Mat::from_row_slice(1, 2, &[sigma_small, extra]),
            Mat::identity(1, 1),
            LtiInit::Point(Col::zeros(1)),
            None,
        )
        .unwrap();
        let policy = FnStrategy::new(|_, x| {
            let xv = x.as_vector().unwrap();
            InputPoint::Vector(Col::from_row_slice(&[-0.2 * xv[0]]))
        });
        let horizon = 5;
        let trials = 20_000;
        let seeds = crate::rng::SeedStream::new(77);
        let collect = |model: &GaussianLtiGmdp, tag: u64| -> (f64, f64) {
            let mut sum = 0.0;
            let mut sum2 = 0.0;
            for t in 0..trials {
                let mut rng = seeds.child(tag).stream(t as u64);
                let mut s = policy.clone();
                let tr = execute_controlled_with(model, &mut s, horizon, &mut rng);
                sum += tr;
                sum2 += tr * tr;
            }
            let mean = sum / trials as f64;
            (mean, sum2 / trials as f64 - mean * mean)
        };
        fn execute_controlled_with(
            model: &GaussianLtiGmdp,
            s: &mut FnStrategy,
            horizon: usize,
            rng: &mut crate::rng::StreamRng,
        ) -> f64 {
            let tr = crate::model::execute_with_rng(ModelRef::Lti(model), s, horizon, rng).unwrap();
            match tr.outputs.last().unwrap() {
                crate::model::Output::Point(v) => v[0],
                _ => unreachable!(),
            }
        }
        let (mean1, var1) = collect(&m1, 1);
        let (mean2, var2) = collect(&m2, 2);
        let se = (var1 / trials as f64).sqrt();
        assert!((mean1 - mean2).abs() < 4.0 * se, "means {mean1} vs {mean2}");
        assert!((var1 - var2).abs() / var1 < 0.1, "variances {var1} vs {var2}");
    }

    #[test]
    fn finite_pair_certificate_zero_for_identical_models() {
        let k = Mat::from_row_slice(2, 2, &[0.3, 0.7, 0.6, 0.4]);
        let m = FiniteGmdp::new(
            vec![k],
            Col::from_row_slice(&[1.0, 0.0]),
            vec![Output::Label(0), Output::Label(1)],
            OutputMetric::Discrete,
        )
        .unwrap();
        let mask = vec![vec![true, false], vec![false, true]];
        let iface = vec![vec![vec![0, 0], vec![0, 0]]];
        let (d, e) = certify_finite_pair(&m, &m, &mask, &iface).unwrap();
        assert!(d < 1e-12);
        assert_eq!(e, 0.0);
    }
}
