use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    ShapeMismatch {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },

    #[error("grid dimensions must be positive (got {rows}x{cols})")]
    EmptyGrid { rows: usize, cols: usize },

    #[error("buffer of length {len} does not match {rows}x{cols}")]
    BufferLength {
        rows: usize,
        cols: usize,
        len: usize,
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("parameter domain violated: {0}")]
    ParameterDomain(String),

    #[error("M-subproblem is not strongly convex: beta1 = {beta1} must exceed a = {a}")]
    NonConvexSubproblem { beta1: f64, a: f64 },

    #[error("solver diverged at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),

    #[error("cannot form {k} clusters from {distinct} distinct values")]
    ClusterDomain { k: usize, distinct: usize },

    #[error("band stack is empty")]
    EmptyStack,

    #[error("unsupported image format in {path}: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },

    #[error("unsupported bit depth in {path}: maxval {maxval} (only 8-bit supported)")]
    UnsupportedDepth { path: PathBuf, maxval: u32 },

    #[error("malformed mask file {path}: {reason}")]
    MalformedMask { path: PathBuf, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(expected: (usize, usize), got: (usize, usize)) -> Self {
        Error::ShapeMismatch {
            expected_rows: expected.0,
            expected_cols: expected.1,
            rows: got.0,
            cols: got.1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
