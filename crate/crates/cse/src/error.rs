use std::io;

/// Crate-wide error type.
///
/// Variants are grouped by failure class so callers (notably the CLI) can map
/// them to exit codes: parse/data problems vs. numeric divergence.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A malformed input line, reported with its 1-based line number.
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Structurally valid input that cannot be used (empty table, no users
    /// surviving a filter, inconsistent key spaces, ...).
    #[error("{0}")]
    Data(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    /// Training diverged: a non-finite loss was observed.
    #[error("non-finite loss at sample {step}; try a smaller learning rate")]
    NonFinite { step: u64 },

    /// An invalid configuration value, caught before any work starts.
    #[error("invalid config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
