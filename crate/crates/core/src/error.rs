use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("verification grid is empty")]
    EmptyGrid,

    #[error("chart not evaluable at {point:?}: {reason}")]
    ChartNotEvaluable { point: Vec<f64>, reason: String },

    #[error("metric fails admissibility: {0}")]
    Inadmissible(String),

    #[error("kernel singular on the diagonal")]
    Singular,

    #[error("point {point:?} too close to the solver box boundary (padding {padding})")]
    PaddingViolated { point: Vec<f64>, padding: f64 },

    #[error("time step too large for theta = {theta}: suggested tau <= {suggested:e}")]
    Resolution { theta: f64, suggested: f64 },

    #[error("unsupported dimension {0} for this operation")]
    UnsupportedDimension(usize),

    #[error("point {0:?} is not on the region boundary")]
    NotOnBoundary(Vec<f64>),

    #[error("insufficient sample diversity: {0}")]
    InsufficientSamples(String),

    #[error("geometry violation: {0}")]
    Geometry(String),

    #[error("degenerate point cloud: {0}")]
    Degenerate(String),

    #[error("precondition failed at scale {scale}: {reason}")]
    Precondition { scale: usize, reason: String },

    #[error("growth check failed: {0}")]
    Growth(String),

    #[error("refinement did not converge: {trace:?}")]
    Refinement { trace: Vec<f64> },

    #[error("principal value did not converge: {0}")]
    PvDivergence(String),

    #[error("flow did not converge: {0}")]
    Convergence(String),

    #[error("calibration fit failed: {0}")]
    Calibration(String),

    #[error("config error at `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
