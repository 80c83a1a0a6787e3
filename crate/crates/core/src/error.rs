//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by dataset loading, simulation, estimation, and training.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (bad parameter ranges, dimension mismatches).
    #[error("config error: {0}")]
    Config(String),

    /// Invalid or inconsistent data (unknown ids, non-finite values).
    #[error("data error: {0}")]
    Data(String),

    /// Malformed input text.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A randomized experiment could not be carried out as configured.
    #[error("experiment error: {0}")]
    Experiment(String),

    /// Propensity estimation failed (e.g. degenerate click-through rates).
    #[error("estimation error: {0}")]
    Estimation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
