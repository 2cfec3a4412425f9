use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point {point:?} lies outside the evaluable domain of {field}")]
    Domain { field: String, point: Vec<f64> },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quadrature did not converge: error estimate {estimate:e} exceeds tolerance {tolerance:e}")]
    QuadratureNonconvergence { estimate: f64, tolerance: f64 },

    #[error("singular linear system in {context}")]
    SingularSystem { context: &'static str },

    #[error("{context} did not converge after {iterations} iterations (residual {residual:e})")]
    Nonconvergence {
        context: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("{context}: sequence is not Cauchy ({detail})")]
    Divergence { context: &'static str, detail: String },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("unknown registry entry `{0}`")]
    UnknownFunction(String),

    #[error("field data: {0}")]
    Format(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
