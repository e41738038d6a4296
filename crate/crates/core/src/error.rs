use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("root finder failed: {0}")]
    Root(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("numerical gate failed: {0}")]
    Gate(String),
}

impl Error {
    /// Errors caused by bad input rather than by numerics.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Domain(_) | Error::Invalid(_) | Error::Unsupported(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! invalid {
    ($($arg:tt)*) => { $crate::error::Error::Invalid(format!($($arg)*)) };
}
pub(crate) use invalid;
