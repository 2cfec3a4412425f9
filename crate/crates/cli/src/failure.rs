use std::fmt;

use campanato_core::Error;

pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    /// Configuration error at `key`.
    pub fn field(key: &str, e: impl fmt::Display) -> Self {
        Self::usage(format!("{key}: {e}"))
    }

    /// Error raised by the core while computing in `module`.
    pub fn compute(module: &str, e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter { .. }
            | Error::UnknownFunction(_)
            | Error::DimensionMismatch { .. }
            | Error::Format(_)
            | Error::Io(_) => EXIT_USAGE,
            Error::Domain { .. }
            | Error::QuadratureNonconvergence { .. }
            | Error::SingularSystem { .. }
            | Error::Nonconvergence { .. }
            | Error::Divergence { .. }
            | Error::Precondition(_) => EXIT_NUMERICAL,
        };
        Failure {
            code,
            message: format!("{module}: {e}"),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}
