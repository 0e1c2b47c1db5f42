//! Error taxonomy shared across the crate.
//!
//! The variants map onto the process exit codes used by the CLI:
//! configuration and sizing problems exit with 2, numerical and search
//! failures with 3, validation failures with 4.

use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated a structural contract (dimension mismatch,
    /// unmet precondition).
    #[error("structural error: {0}")]
    Structural(String),

    /// A numerical routine left its trusted regime (indefinite covariance,
    /// failed factorization, non-finite result).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Invalid or inconsistent configuration.
    #[error("config error: {0}")]
    Config(String),

    /// An instance exceeded an enumeration budget and was refused.
    #[error("size error: {0}")]
    Budget(String),

    /// A search produced no usable candidate.
    #[error("search failure: {0}")]
    Search(String),

    /// I/O failure, annotated with the path involved.
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code associated with this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Budget(_) | Error::Io { .. } => 2,
            Error::Structural(_) | Error::Numerical(_) | Error::Search(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
