//! Core model types and execution semantics.
//!
//! Two concrete model classes are supported: finite-state controlled Markov
//! chains and Gaussian linear time-invariant processes, both with a metric
//! output map. Controllers are inhomogeneous Markov processes behind the
//! [`Strategy`] trait; [`execute_controlled`] runs the controller/model loop
//! with the controller and model transitions drawn in alternation.

use crate::error::{GmdpError, Result};
use crate::linalg::{psd_factor, Col, Mat};
use crate::rng::{standard_normal_vec, SeedStream, StreamRng};
use rand::Rng;

/// A state of either model class.
#[derive(Debug, Clone, PartialEq)]
pub enum StatePoint {
    Finite(usize),
    Vector(Col),
}

impl StatePoint {
    pub fn as_finite(&self) -> Result<usize> {
        match self {
            StatePoint::Finite(i) => Ok(*i),
            _ => Err(GmdpError::InvalidArgument("expected a finite state".into())),
        }
    }

    pub fn as_vector(&self) -> Result<&Col> {
        match self {
            StatePoint::Vector(v) => Ok(v),
            _ => Err(GmdpError::InvalidArgument("expected a vector state".into())),
        }
    }
}

/// An input of either model class.
#[derive(Debug, Clone, PartialEq)]
pub enum InputPoint {
    Finite(usize),
    Vector(Col),
}

impl InputPoint {
    pub fn as_finite(&self) -> Result<usize> {
        match self {
            InputPoint::Finite(i) => Ok(*i),
            _ => Err(GmdpError::InvalidArgument("expected a finite input".into())),
        }
    }

    pub fn as_vector(&self) -> Result<&Col> {
        match self {
            InputPoint::Vector(v) => Ok(v),
            _ => Err(GmdpError::InvalidArgument("expected a vector input".into())),
        }
    }
}

/// An output point in the metric output space.
#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    Label(usize),
    Point(Col),
}

/// Metric on the output space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputMetric {
    /// 0/1 metric for labelled outputs.
    Discrete,
    /// Euclidean norm for numeric outputs.
    Euclidean,
}

impl OutputMetric {
    pub fn distance(&self, a: &Output, b: &Output) -> f64 {
        match (self, a, b) {
            (OutputMetric::Discrete, Output::Label(x), Output::Label(y)) => {
                if x == y {
                    0.0
                } else {
                    1.0
                }
            }
            (OutputMetric::Euclidean, Output::Point(x), Output::Point(y)) => (x - y).norm(),
            _ => f64::INFINITY,
        }
    }
}

/// A model-validation finding; an empty report means all invariants hold.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub location: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

// ---------------------------------------------------------------------------
// finite models
// ---------------------------------------------------------------------------

/// Finite-state controlled Markov chain with a labelled (or numeric) output map.
#[derive(Debug, Clone)]
pub struct FiniteGmdp {
    /// `kernel[u]` is the n×n transition matrix under action `u` (rows are states).
    pub kernel: Vec<Mat>,
    /// Initial distribution over states.
    pub init: Col,
    /// Output point of each state.
    pub outputs: Vec<Output>,
    pub metric: OutputMetric,
}

impl FiniteGmdp {
    pub fn new(kernel: Vec<Mat>, init: Col, outputs: Vec<Output>, metric: OutputMetric) -> Result<Self> {
        let m = Self { kernel, init, outputs, metric };
        let diags = m.validate();
        if diags.is_empty() {
            Ok(m)
        } else {
            Err(GmdpError::InvalidModel(
                diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "),
            ))
        }
    }

    pub fn n_states(&self) -> usize {
        self.init.len()
    }

    pub fn n_actions(&self) -> usize {
        self.kernel.len()
    }

    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let n = self.init.len();
        if self.kernel.is_empty() {
            out.push(Diagnostic { location: "kernel".into(), message: "no actions".into() });
        }
        for (u, k) in self.kernel.iter().enumerate() {
            if k.shape() != (n, n) {
                out.push(Diagnostic {
                    location: format!("kernel[{u}]"),
                    message: format!("shape {:?}, expected ({n}, {n})", k.shape()),
                });
                continue;
            }
            for x in 0..n {
                let row = k.row(x);
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-12 {
                    out.push(Diagnostic {
                        location: format!("kernel[x={x}, u={u}]"),
                        message: format!("row sums to {sum:.15}, expected 1"),
                    });
                }
                if row.iter().any(|&p| p < 0.0) {
                    out.push(Diagnostic {
                        location: format!("kernel[x={x}, u={u}]"),
                        message: "negative transition probability".into(),
                    });
                }
            }
        }
        let isum: f64 = self.init.iter().sum();
        if (isum - 1.0).abs() > 1e-12 {
            out.push(Diagnostic {
                location: "init".into(),
                message: format!("sums to {isum:.15}, expected 1"),
            });
        }
        if self.init.iter().any(|&p| p < 0.0) {
            out.push(Diagnostic { location: "init".into(), message: "negative entry".into() });
        }
        if self.outputs.len() != n {
            out.push(Diagnostic {
                location: "outputs".into(),
                message: format!("{} outputs for {n} states", self.outputs.len()),
            });
        }
        out
    }

    pub fn output(&self, x: usize) -> Output {
        self.outputs[x].clone()
    }

    /// Transition distribution row as a vector.
    pub fn row(&self, x: usize, u: usize) -> Col {
        self.kernel[u].row(x).transpose()
    }
}

/// Draw an index from a probability vector.
pub fn sample_categorical(p: &Col, rng: &mut StreamRng) -> usize {
    let r: f64 = rng.random::<f64>();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if r < acc {
            return i;
        }
    }
    p.len() - 1
}

// ---------------------------------------------------------------------------
// Gaussian LTI models
// ---------------------------------------------------------------------------

/// Initial condition of an LTI model.
#[derive(Debug, Clone)]
pub enum LtiInit {
    Point(Col),
    Gaussian { mean: Col, cov: Mat },
}

/// Discrete-time Gaussian linear model `x⁺ = A x + B u + B_w w`, `y = C x`,
/// with `w` a standard normal vector.
#[derive(Debug, Clone)]
pub struct GaussianLtiGmdp {
    pub a: Mat,
    pub b: Mat,
    pub b_w: Mat,
    pub c: Mat,
    pub init: LtiInit,
    /// Admissible inputs `{u : uᵀu ≤ c1}` when present.
    pub input_bound: Option<f64>,
}

impl GaussianLtiGmdp {
    pub fn new(a: Mat, b: Mat, b_w: Mat, c: Mat, init: LtiInit, input_bound: Option<f64>) -> Result<Self> {
        let m = Self { a, b, b_w, c, init, input_bound };
        let diags = m.validate();
        if diags.is_empty() {
            Ok(m)
        } else {
            Err(GmdpError::InvalidModel(
                diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "),
            ))
        }
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_noise(&self) -> usize {
        self.b_w.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let n = self.a.nrows();
        if self.a.ncols() != n {
            out.push(Diagnostic { location: "A".into(), message: "not square".into() });
        }
        if self.b.nrows() != n {
            out.push(Diagnostic { location: "B".into(), message: format!("{} rows, expected {n}", self.b.nrows()) });
        }
        if self.b_w.nrows() != n {
            out.push(Diagnostic { location: "B_w".into(), message: format!("{} rows, expected {n}", self.b_w.nrows()) });
        }
        if self.c.ncols() != n {
            out.push(Diagnostic { location: "C".into(), message: format!("{} cols, expected {n}", self.c.ncols()) });
        }
        match &self.init {
            LtiInit::Point(x0) => {
                if x0.len() != n {
                    out.push(Diagnostic { location: "init".into(), message: "point dimension mismatch".into() });
                }
            }
            LtiInit::Gaussian { mean, cov } => {
                if mean.len() != n || cov.shape() != (n, n) {
                    out.push(Diagnostic { location: "init".into(), message: "gaussian dimension mismatch".into() });
                }
                if (cov - cov.transpose()).norm() > 1e-10 * cov.norm().max(1.0) {
                    out.push(Diagnostic { location: "init.cov".into(), message: "covariance not symmetric".into() });
                } else if cov.clone().symmetric_eigen().eigenvalues.min() < -1e-10 {
                    out.push(Diagnostic {
                        location: "init.cov".into(),
                        message: "covariance not positive semi-definite".into(),
                    });
                }
            }
        }
        if let Some(c1) = self.input_bound {
            if c1 <= 0.0 {
                out.push(Diagnostic { location: "input_bound".into(), message: format!("c1 = {c1} not positive") });
            }
        }
        out
    }

    pub fn check_input(&self, u: &Col) -> Result<()> {
        if u.len() != self.n_inputs() {
            return Err(GmdpError::InputOutOfRange(format!(
                "input dimension {} (model takes {})",
                u.len(),
                self.n_inputs()
            )));
        }
        if let Some(c1) = self.input_bound {
            let q = u.dot(u);
            if q > c1 * (1.0 + 1e-9) {
                return Err(GmdpError::InputOutOfRange(format!("uᵀu = {q:.6} exceeds bound {c1:.6}")));
            }
        }
        Ok(())
    }

    pub fn output(&self, x: &Col) -> Output {
        Output::Point(&self.c * x)
    }

    pub fn step_mean(&self, x: &Col, u: &Col) -> Col {
        &self.a * x + &self.b * u
    }

    pub fn sample_init(&self, rng: &mut StreamRng) -> Result<Col> {
        match &self.init {
            LtiInit::Point(x0) => Ok(x0.clone()),
            LtiInit::Gaussian { mean, cov } => {
                let f = psd_factor(cov, 1e-12)?;
                let z = standard_normal_vec(rng, f.ncols());
                Ok(mean + f * z)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// model abstraction used by the executor
// ---------------------------------------------------------------------------

/// Either model class, borrowed for execution.
#[derive(Clone, Copy)]
pub enum ModelRef<'a> {
    Finite(&'a FiniteGmdp),
    Lti(&'a GaussianLtiGmdp),
}

impl<'a> ModelRef<'a> {
    pub fn sample_init(&self, rng: &mut StreamRng) -> Result<StatePoint> {
        match self {
            ModelRef::Finite(m) => Ok(StatePoint::Finite(sample_categorical(&m.init, rng))),
            ModelRef::Lti(m) => Ok(StatePoint::Vector(m.sample_init(rng)?)),
        }
    }

    pub fn sample_transition(&self, x: &StatePoint, u: &InputPoint, rng: &mut StreamRng) -> Result<StatePoint> {
        match (self, x, u) {
            (ModelRef::Finite(m), StatePoint::Finite(x), InputPoint::Finite(u)) => {
                if *u >= m.n_actions() {
                    return Err(GmdpError::InputOutOfRange(format!(
                        "action {u} of {}",
                        m.n_actions()
                    )));
                }
                let row = m.row(*x, *u);
                Ok(StatePoint::Finite(sample_categorical(&row, rng)))
            }
            (ModelRef::Lti(m), StatePoint::Vector(x), InputPoint::Vector(u)) => {
                m.check_input(u)?;
                let w = standard_normal_vec(rng, m.n_noise());
                Ok(StatePoint::Vector(m.step_mean(x, u) + &m.b_w * w))
            }
            _ => Err(GmdpError::InvalidArgument("state/input kind does not match model".into())),
        }
    }

    pub fn output(&self, x: &StatePoint) -> Result<Output> {
        match (self, x) {
            (ModelRef::Finite(m), StatePoint::Finite(x)) => Ok(m.output(*x)),
            (ModelRef::Lti(m), StatePoint::Vector(x)) => Ok(m.output(x)),
            _ => Err(GmdpError::InvalidArgument("state kind does not match model".into())),
        }
    }
}

// ---------------------------------------------------------------------------
// control strategies
// ---------------------------------------------------------------------------

/// Inhomogeneous Markov controller. `input_for` both advances the internal
/// controller state and returns the input to apply; `observe` feeds the
/// freshly drawn model state back into the controller (used by refined
/// strategies to advance their tracked abstract state).
pub trait Strategy: Send + Sync {
    fn reset(&mut self);

    fn input_for(&mut self, t: usize, x: &StatePoint, rng: &mut StreamRng) -> Result<InputPoint>;

    fn observe(&mut self, _t: usize, _x_next: &StatePoint, _rng: &mut StreamRng) {}

    /// Largest horizon the strategy is defined for; `None` means unbounded.
    fn horizon(&self) -> Option<usize> {
        None
    }

    fn box_clone(&self) -> Box<dyn Strategy>;

    /// Refinement bookkeeping, when the strategy is a refined controller.
    fn refinement_log(&self) -> Option<&crate::refine::RefinementLog> {
        None
    }
}

impl Clone for Box<dyn Strategy> {
    fn clone(&self) -> Self {
        self.box_clone()
    }
}

/// Deterministic memoryless policy given by a closure of time and state.
#[derive(Clone)]
pub struct FnStrategy {
    f: std::sync::Arc<dyn Fn(usize, &StatePoint) -> InputPoint + Send + Sync>,
    horizon: Option<usize>,
}

impl FnStrategy {
    pub fn new(f: impl Fn(usize, &StatePoint) -> InputPoint + Send + Sync + 'static) -> Self {
        Self { f: std::sync::Arc::new(f), horizon: None }
    }

    pub fn with_horizon(mut self, n: usize) -> Self {
        self.horizon = Some(n);
        self
    }
}

impl Strategy for FnStrategy {
    fn reset(&mut self) {}

    fn input_for(&mut self, t: usize, x: &StatePoint, _rng: &mut StreamRng) -> Result<InputPoint> {
        Ok((self.f)(t, x))
    }

    fn horizon(&self) -> Option<usize> {
        self.horizon
    }

    fn box_clone(&self) -> Box<dyn Strategy> {
        Box::new(self.clone())
    }
}

/// Markov policy for finite models: per time step (or stationary), a
/// distribution over actions for every state.
#[derive(Debug, Clone)]
pub struct MarkovPolicy {
    /// `table[t][x]` is a distribution over actions; a single entry makes the
    /// policy stationary.
    pub table: Vec<Vec<Col>>,
}

impl MarkovPolicy {
    pub fn stationary_deterministic(choices: &[usize], n_actions: usize) -> Self {
        let rows = choices
            .iter()
            .map(|&u| {
                let mut c = Col::zeros(n_actions);
                c[u] = 1.0;
                c
            })
            .collect();
        Self { table: vec![rows] }
    }

    pub fn dist(&self, t: usize, x: usize) -> &Col {
        let row = if self.table.len() == 1 { &self.table[0] } else { &self.table[t] };
        &row[x]
    }
}

impl Strategy for MarkovPolicy {
    fn reset(&mut self) {}

    fn input_for(&mut self, t: usize, x: &StatePoint, rng: &mut StreamRng) -> Result<InputPoint> {
        let xi = x.as_finite()?;
        if self.table.len() > 1 && t >= self.table.len() {
            return Err(GmdpError::StrategyTooShort { requested: t, available: self.table.len() - 1 });
        }
        Ok(InputPoint::Finite(sample_categorical(self.dist(t, xi), rng)))
    }

    fn horizon(&self) -> Option<usize> {
        if self.table.len() == 1 {
            None
        } else {
            Some(self.table.len() - 1)
        }
    }

    fn box_clone(&self) -> Box<dyn Strategy> {
        Box::new(self.clone())
    }
}

// ---------------------------------------------------------------------------
// traces and execution
// ---------------------------------------------------------------------------

/// One controlled execution: states `x(0..N)`, inputs `u(0..N−1)`, outputs
/// `y(t) = h(x(t))`.
#[derive(Debug, Clone)]
pub struct Trace {
    pub states: Vec<StatePoint>,
    pub inputs: Vec<InputPoint>,
    pub outputs: Vec<Output>,
    pub refinement: Option<crate::refine::RefinementLog>,
}

impl Trace {
    pub fn horizon(&self) -> usize {
        self.states.len().saturating_sub(1)
    }
}

/// Run the controlled model for `horizon` steps with a dedicated stream of
/// the given seed. Bit-reproducible for a fixed seed.
pub fn execute_controlled(
    model: ModelRef<'_>,
    strategy: &mut dyn Strategy,
    horizon: usize,
    seed: u64,
) -> Result<Trace> {
    let mut rng = SeedStream::new(seed).stream(0);
    execute_with_rng(model, strategy, horizon, &mut rng)
}

/// Same as [`execute_controlled`] with a caller-managed stream (used by the
/// Monte-Carlo harness to hand each trial its own stream).
pub fn execute_with_rng(
    model: ModelRef<'_>,
    strategy: &mut dyn Strategy,
    horizon: usize,
    rng: &mut StreamRng,
) -> Result<Trace> {
    if let Some(h) = strategy.horizon() {
        if horizon > h {
            return Err(GmdpError::StrategyTooShort { requested: horizon, available: h });
        }
    }
    strategy.reset();
    let mut states = Vec::with_capacity(horizon + 1);
    let mut inputs = Vec::with_capacity(horizon);
    let mut outputs = Vec::with_capacity(horizon + 1);

    let x0 = model.sample_init(rng)?;
    outputs.push(model.output(&x0)?);
    states.push(x0);

    for t in 0..horizon {
        let u = strategy.input_for(t, states.last().unwrap(), rng)?;
        let x_next = model.sample_transition(states.last().unwrap(), &u, rng)?;
        strategy.observe(t + 1, &x_next, rng);
        outputs.push(model.output(&x_next)?);
        inputs.push(u);
        states.push(x_next);
    }

    Ok(Trace { states, inputs, outputs, refinement: strategy.refinement_log().cloned() })
}
