//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

/// Errors produced by tensor algebra, file handling and the decomposition
/// drivers.
#[derive(Error, Debug)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid mode index {mode} for order-{order} tensor")]
    InvalidMode { mode: usize, order: usize },

    #[error("tensor order {0} is not supported (supported: 2, 3, 4)")]
    UnsupportedOrder(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("duplicate coordinates at {path}:{line}")]
    DuplicateCoordinates { path: PathBuf, line: u64 },

    #[error("zero-norm tensor: {0}")]
    ZeroNorm(String),

    #[error("matrix is not symmetric within tolerance (max asymmetry {max_asym:e})")]
    NotSymmetric { max_asym: f64 },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("corrupt file {path}: {msg}")]
    Corrupt { path: PathBuf, msg: String },

    #[error("missing slice store for {0}")]
    MissingStore(String),

    #[error("tracked memory {used} bytes exceeded configured cap {cap} bytes")]
    MemoryBudget { used: u64, cap: u64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bench spec error: {0}")]
    BenchSpec(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
