use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the denoising pipeline and its building blocks.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("vertex count mismatch: header declares {expected}, file contains {actual}")]
    VertexCount { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point cloud must contain at least {required} points, got {actual}")]
    TooFewPoints { required: usize, actual: usize },

    #[error("non-finite coordinate at point {index}")]
    NonFinite { index: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("no non-collinear support pair for node {node}")]
    NoSupportPair { node: usize },

    #[error("points are collinear (cross product norm {norm:e})")]
    Collinear { norm: f64 },

    #[error("missing {what} for node {node}")]
    MissingNode { what: &'static str, node: usize },

    #[error("non-finite iterate on edge {edge} ({i}, {j})")]
    NonFiniteIterate { edge: usize, i: usize, j: usize },

    #[error(
        "ADMM diverged at iteration {iteration} (residual {residual:e}); \
         try a smaller step size t or a larger admm_max_iter"
    )]
    Diverged { iteration: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
