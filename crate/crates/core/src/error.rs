//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
///
/// Variants map onto the CLI exit codes: `Config` -> 2, `Parse`/`Io` -> 3,
/// `Domain`/`Contract` -> 4.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an operation's arguments was violated.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input data could not be parsed or failed validation.
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    /// Input data parsed but cannot support the requested run.
    #[error("data error: {0}")]
    Data(String),

    /// The experiment configuration is invalid.
    #[error("config error: {0}")]
    Config(String),

    /// An internal invariant was violated at runtime.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn parse(row: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            row,
            message: msg.into(),
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
