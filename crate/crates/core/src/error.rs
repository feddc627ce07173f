use thiserror::Error;

/// Errors produced by the solver and the analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in input field")]
    NonFinite,

    #[error("axis {axis} out of range for dimension {dim}")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("field is unresolved: spectral tail fraction {tail:.3e} exceeds {threshold:.1e}")]
    Unresolved { tail: f64, threshold: f64 },

    #[error("solution under-resolved at t = {time}: tail fraction {tail:.3e} exceeds {threshold:.1e}")]
    UnderResolved { time: f64, tail: f64, threshold: f64 },

    #[error("blow-up: non-finite state at t = {time}")]
    BlowUp { time: f64 },

    #[error("box too small: |phi| = {tail:.3e} at distance S/2 from the center exceeds {tolerance:.1e}")]
    BoxTooSmall { tail: f64, tolerance: f64 },

    #[error("sequence parameters not resolvable: {0}")]
    NotResolvable(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
