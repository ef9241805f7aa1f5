use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cone sectors do not cover lattice point {point:?}")]
    SectorCoverageGap { point: Vec<f64> },

    #[error("bump support (radius {support}) around {center:?} leaves the domain [-{radius}, {radius}]^n")]
    SupportExceedsDomain {
        center: Vec<f64>,
        support: f64,
        radius: f64,
    },

    #[error("Jacobi eigenvalue iteration did not converge after {sweeps} sweeps")]
    EigenNonConvergence { sweeps: usize },

    #[error("complex-determinant angle needs n <= 4 and all |eigenvalues| < 1")]
    BranchAmbiguity,

    #[error("stencil leaves the grid and no ghost closure is available")]
    MissingGhostClosure,

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("non-finite value at step {step}, point {point:?}")]
    NonFinite { step: usize, point: Vec<f64> },

    #[error("blow-up at step {step}: sup |field| = {value}")]
    BlowUp { step: usize, value: f64 },

    #[error("no stationary state within s_end = {s_end}: final residual {final_residual}")]
    NonConvergence { s_end: f64, final_residual: f64 },

    #[error("Condition A violated: margin {margin} (delta = {delta})")]
    ConditionA { margin: f64, delta: f64 },

    #[error("spectral radius {0} is not below 1")]
    SpectralRadius(f64),

    #[error("missing snapshot at time {0}")]
    MissingSnapshot(f64),

    #[error("linear solver stalled after {iterations} iterations (relative residual {residual})")]
    LinearSolve { iterations: usize, residual: f64 },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("empty report")]
    EmptyReport,

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
