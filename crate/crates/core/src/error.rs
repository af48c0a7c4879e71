use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value outside the physical or mathematical domain of an operation.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Overlapping mainlobes that ask for different levels.
    #[error("ambiguous desired beampattern: {0}")]
    AmbiguousPattern(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix {index} is not rank one (lambda2/lambda1 = {ratio:.3e}, tolerance {tol:.1e})")]
    RankOneViolation { index: usize, ratio: f64, tol: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("problem is infeasible: {0}")]
    Infeasible(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
