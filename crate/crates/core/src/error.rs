use thiserror::Error;

/// Failure of a model check, solver or filter.
///
/// Times are reported as `f64` regardless of the scalar type in use.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("criterion matrix is not nonnegative definite at t = {t}: {detail}")]
    NonPositiveDefinite { t: f64, detail: String },
    #[error("Lambda22 must be strictly positive, got {value} at t = {t}")]
    ZeroLambda22 { t: f64, value: f64 },
    #[error("non-finite value in {what} at t = {t}")]
    NonFinite { what: String, t: f64 },
    #[error("{what} exceeded the blow-up cap at t = {t}")]
    Blowup { what: String, t: f64 },
    #[error("phi1 of the linearized backward Riccati system vanishes at t = {t}")]
    SingularPhi1 { t: f64 },
    #[error("Riccati-Volterra diagonal is negative at t = {t}: {value}")]
    NegativeDiagonal { t: f64, value: f64 },
    #[error("condition violated: {0}")]
    ConditionViolated(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("configuration error for `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Validation,
    Condition,
    Numeric,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::NonPositiveDefinite { .. }
            | Error::ZeroLambda22 { .. }
            | Error::GridMismatch(_)
            | Error::Invalid(_)
            | Error::Config { .. }
            | Error::Io(_) => ErrorCategory::Validation,
            Error::Blowup { .. }
            | Error::SingularPhi1 { .. }
            | Error::NegativeDiagonal { .. }
            | Error::ConditionViolated(_) => ErrorCategory::Condition,
            Error::NonFinite { .. } => ErrorCategory::Numeric,
        }
    }

    pub(crate) fn non_finite(what: impl Into<String>, t: f64) -> Self {
        Error::NonFinite { what: what.into(), t }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
