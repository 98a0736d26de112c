use thiserror::Error;

/// Errors raised by the certification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parameter out of range: {0}")]
    Domain(String),

    #[error("overlap bounds are not realizable: {0}")]
    InfeasibleOverlaps(String),

    #[error("statistics cannot be reproduced by any admissible strategy (L1 deviation {deviation:.3e})")]
    InfeasibleStatistics { deviation: f64 },

    #[error("solver failed: {0}")]
    NumericalFailure(String),

    #[error("see-saw did not converge after {restarts} restarts (best value {best:?})")]
    NoConvergence {
        restarts: usize,
        best: Option<f64>,
        trajectory: Vec<f64>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
