//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by scene construction, the forward model, and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// Two points coincide (or nearly so) where a direction is required.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// Matrix/vector dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A configuration value violates an invariant.
    #[error("invalid configuration: {field}: {message}")]
    InvalidConfig { field: String, message: String },

    /// Requested index does not exist.
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    /// A source id that is not in the embedded set.
    #[error("unknown letter source `{0}`")]
    UnknownLetter(String),

    /// Measurements carry no energy, so no informative direction exists.
    #[error("all measurements are zero; cannot initialize")]
    ZeroMeasurements,

    /// Operation requires the other measurement mode.
    #[error("wrong measurement mode: expected {expected}")]
    WrongMeasurementMode { expected: &'static str },

    /// The iterative solver produced a non-finite objective.
    #[error("solver diverged at outer iteration {iteration}")]
    Divergence { iteration: usize },

    /// Scenario file could not be parsed.
    #[error("failed to parse scenario: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(field: &str, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
