use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("scatter matrix is singular (ridge lambda = {lambda}); use a ridge lambda > 0")]
    Singular { lambda: f64 },

    #[error("average precision is undefined: no relevant items")]
    UndefinedAp,

    #[error("unseen value {value:?} for attribute {attribute}")]
    UnseenValue { attribute: String, value: String },

    #[error("model file: {0}")]
    Format(String),

    #[error("all {0} grid combinations failed")]
    AllCombinationsFailed(usize),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
