use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("{op}: expected a square matrix, got {shape:?}")]
    NotSquare {
        op: &'static str,
        shape: (usize, usize),
    },

    #[error("{op}: expected a wide matrix (rows <= cols), got {shape:?}")]
    NotWide {
        op: &'static str,
        shape: (usize, usize),
    },

    #[error("invalid matrix dimensions: {0}")]
    InvalidDimensions(String),

    #[error("householder QR: column {column} is numerically dependent (pivot norm {pivot:e})")]
    RankDeficient { column: usize, pivot: f64 },

    #[error("polar projection did not converge after {iters} iterations (residual {residual:e})")]
    ProjectionFailed { iters: usize, residual: f64 },

    #[error("matrix is {distance:e} away from the Stiefel manifold (tolerance {tol:e})")]
    NotOnManifold { distance: f64, tol: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("polynomial is identically zero")]
    DegeneratePolynomial,

    #[error("problem `{0}` has no known optimal value")]
    UnsupportedMetric(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl Error {
    /// True for failures caused by the numerics of a run (divergence,
    /// projection failure) rather than by bad input or I/O.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::ProjectionFailed { .. }
                | Error::RankDeficient { .. }
                | Error::NotOnManifold { .. }
        )
    }
}
