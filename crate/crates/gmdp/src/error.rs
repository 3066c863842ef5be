use thiserror::Error;

/// Errors surfaced by model construction, solvers, and execution.
#[derive(Debug, Error)]
pub enum GmdpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("strategy too short: horizon {requested} exceeds strategy horizon {available}")]
    StrategyTooShort { requested: usize, available: usize },

    #[error("input out of range: {0}")]
    InputOutOfRange(String),

    #[error("unstable A: spectral radius {rho:.6} >= 1")]
    UnstableDynamics { rho: f64 },

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error("infeasible constraints: {0}")]
    Infeasible(String),

    #[error("relation not contractive; adjust K or M (alpha = {alpha:.6})")]
    NotContractive { alpha: f64 },

    #[error("lifting not noise-reconstructible: {0}")]
    NotReconstructible(String),

    #[error("unsupported region: {0}")]
    UnsupportedRegion(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("state-space explosion guard: {0}")]
    ExplosionGuard(String),

    #[error("middle models differ: {0}")]
    MiddleModelMismatch(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, GmdpError>;
