use thiserror::Error;

/// Errors raised by the inference library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("value out of range: {0}")]
    Range(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error("empty trace")]
    EmptyTrace,
    #[error("non-finite initial log-likelihood ({0}); review the thresholds or the initial state")]
    NonFiniteStart(f64),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
