use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the crate.
///
/// The CLI maps each variant to a process exit code via [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain an operation accepts.
    #[error("domain error: {0}")]
    Domain(String),

    /// Cholesky factorization hit a non-positive pivot.
    #[error("factorization failed at pivot {pivot} (value {value:e}){context}")]
    Factorization {
        pivot: usize,
        value: f64,
        context: String,
    },

    /// A numeric failure inside a running chain.
    #[error("numeric failure at iteration {iteration}: {source}")]
    Chain {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    /// A CSV cell could not be parsed.
    #[error("ingestion error in {path} at row {row}, column `{column}`: {message}")]
    Ingestion {
        path: String,
        row: usize,
        column: String,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Factorization { .. } => true,
            Error::Chain { source, .. } => source.is_numeric(),
            _ => false,
        }
    }

    /// Exit code used by the command-line tool: 3 for numeric failures,
    /// 1 for i/o failures, 2 for config, schema and input errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Factorization { .. } => 3,
            Error::Chain { source, .. } => source.exit_code(),
            Error::Io { .. } => 1,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
