//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A query log line that cannot be parsed.
    #[error("query log line {line}: {msg}")]
    LogFormat { line: usize, msg: String },

    /// A dataset or label CSV line that cannot be parsed.
    #[error("dataset line {line}: {msg}")]
    DatasetFormat { line: usize, msg: String },

    /// An operation was called with inputs violating its contract.
    #[error("{0}")]
    InvalidInput(String),

    /// A model file that cannot be read back.
    #[error("model file: {0}")]
    Model(String),

    /// One or more invalid configuration values, reported together.
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Exit code the CLI maps this error to: 1 for validation, 2 for runtime.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) => 1,
            _ => 2,
        }
    }
}
