//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the geometry, simulation and estimator layers.
#[derive(Debug, Error)]
pub enum Error {
    /// Chart point outside the model's chart domain.
    #[error("point outside chart domain: {0}")]
    Domain(String),

    /// Invalid argument (wrong degree, non-unit vector, asymmetric operator, ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A stated precondition does not hold (interior point passed to a
    /// boundary operation, hypothesis violated at a sampled witness, ...).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A development step left the chart domain irrecoverably.
    #[error("step failure: {0}")]
    StepFailure(String),

    /// Bad numeric input to an estimator (NaN field values and the like).
    #[error("input error: {0}")]
    Input(String),

    /// Configuration file failed to parse or validate.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
