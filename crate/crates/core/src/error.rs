use thiserror::Error;

/// Errors raised by the numerical routines and the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A computation produced a value that cannot be trusted (non-finite
    /// integrand, unresolved Bergman disk, truncation tail too large).
    #[error("diagnostic: {0}")]
    Diagnostic(String),

    /// Malformed function-spec or configuration input.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn diagnostic(msg: impl Into<String>) -> Self {
        Error::Diagnostic(msg.into())
    }

    /// Short machine-readable class name used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Diagnostic(_) => "diagnostic",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
