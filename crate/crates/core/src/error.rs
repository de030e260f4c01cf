use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Pnm(#[from] PnmError),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    CgNotConverged { iterations: usize, residual: f64 },

    #[error("prox descent did not converge in {iterations} iterations (gradient norm {residual:.3e})")]
    ProxNotConverged { iterations: usize, residual: f64 },

    #[error("denoiser inversion failed for value {value} after {iterations} iterations (residual {residual:.3e}); value is likely outside the denoiser range")]
    OutsideRange {
        value: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("non-finite iterate at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("step size gamma = {gamma} exceeds 1/(4L) = {bound} (L = {lipschitz})")]
    StepTooLarge {
        gamma: f64,
        lipschitz: f64,
        bound: f64,
    },

    #[error("trace has no denoiser-distance column; rerun with record_parallel_target")]
    MissingDelta,

    #[error("config error in {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("unknown verification suite `{0}`")]
    UnknownSuite(String),
}

/// Failures while decoding binary Netpbm files.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum PnmError {
    #[error("unsupported magic number {0:?} (expected P5 or P6)")]
    UnsupportedMagic(String),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
