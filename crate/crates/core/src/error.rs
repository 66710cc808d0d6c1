use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid market specification: {0}")]
    InvalidSpec(String),

    #[error("demand does not straddle capacity {target} on [{lo}, {hi}] (demand {demand_lo} .. {demand_hi})")]
    BracketFailure {
        lo: f64,
        hi: f64,
        demand_lo: f64,
        demand_hi: f64,
        target: f64,
    },

    #[error("cutoff search did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{}line {line}: {message}", source_name.as_deref().map(|s| format!("{s}: ")).unwrap_or_default())]
    Config {
        source_name: Option<String>,
        line: usize,
        message: String,
    },

    #[error("{context} ({path}): {source}")]
    Io {
        context: String,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed results table: {0}")]
    Table(String),

    #[error("experiment cell {cell}: {source}")]
    Cell {
        cell: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for errors caused by user input rather than by the computation.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::InvalidArgument(_) | Error::InvalidSpec(_) | Error::Config { .. } => true,
            Error::Cell { source, .. } => source.is_config_error(),
            _ => false,
        }
    }
}
