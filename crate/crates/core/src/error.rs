use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A functional was used with an evaluation regime it does not support.
    #[error("unsupported regime: {0}")]
    Regime(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn regime(msg: impl Into<String>) -> Self {
        Error::Regime(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
