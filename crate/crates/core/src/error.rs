use thiserror::Error;

/// Errors raised by the estimators and samplers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A spec or config value is outside its valid range.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A call-site argument violates a precondition (empty batch, too few samples, ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Not enough samples were provided; `required` is the minimum the operation needs.
    #[error("insufficient samples: got {got}, need at least {required}")]
    InsufficientSamples { got: usize, required: usize },

    /// A statistic could not be computed from the data (e.g. empty conditional set).
    #[error("estimation failed: {0}")]
    Estimation(String),

    /// Dimensions of two interacting objects disagree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// An operation was called outside its contract (e.g. clean-regime estimator on a dirty input).
    #[error("contract violation: {0}")]
    Contract(String),

    /// An iterate became non-finite or exceeded the divergence guard.
    #[error("numerical failure at iteration {iteration}: {reason}")]
    Numerical { iteration: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn argument(msg: impl Into<String>) -> Error {
    Error::Argument(msg.into())
}
