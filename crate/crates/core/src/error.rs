use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {message} (residual estimate {residual:e})")]
    NumericalFailure { message: String, residual: f64 },

    #[error("filter function undefined: fluence is zero at t = {0}")]
    UndefinedFilter(f64),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("refused: {0}")]
    Refused(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>, residual: f64) -> Self {
        Error::NumericalFailure {
            message: msg.into(),
            residual,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
