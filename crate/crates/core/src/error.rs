use thiserror::Error;

/// Errors raised by the laboratory. Numerical check failures are not errors;
/// they are reported through [`crate::diagnostics::CheckResult`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operation `{operation}` requires a {required} topology")]
    WrongFamily {
        operation: &'static str,
        required: &'static str,
    },

    #[error("row {row} has an infinite sum")]
    DivergentRow { row: usize },

    #[error("degenerate tuple {indices:?}: minimum chordal gap {gap:e} is below {floor:e}")]
    DegenerateTuple {
        indices: [usize; 4],
        gap: f64,
        floor: f64,
    },

    #[error("{what} is unavailable for the {family} family")]
    Unavailable {
        what: &'static str,
        family: &'static str,
    },

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("trajectory did not reach equilibrium tolerance")]
    NotConverged,

    #[error("diameter never entered the quarter arc before t = {t_end}")]
    NoEntranceTime { t_end: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("io error: {0}")]
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
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
