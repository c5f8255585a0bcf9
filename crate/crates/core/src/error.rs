use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the estimation, testing and experiment layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("rank-deficient {what}: condition number {condition:.3e} exceeds {bound:.1e}")]
    RankDeficient {
        what: &'static str,
        condition: f64,
        bound: f64,
    },

    #[error("degenerate likelihood: {0}")]
    DegenerateLikelihood(String),

    #[error("beta normalization invalid: top {rank}x{rank} block is singular")]
    NormalizationInvalid { rank: usize },

    #[error("project-and-lift did not converge after {iterations} iterations (residual {residual:.3e})")]
    IterationLimit {
        iterations: usize,
        residual: f64,
        last: Box<nalgebra::DMatrix<f64>>,
    },

    #[error("undefined measure: {0}")]
    UndefinedMeasure(String),

    #[error("bootstrap aborted at r = {rank}: {failed} of {total} replicates failed")]
    BootstrapFailures {
        rank: usize,
        failed: usize,
        total: usize,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidInput(_) | Error::DimensionMismatch(_) => 2,
            Error::Io { .. } | Error::Csv(_) | Error::Json(_) => 4,
            _ => 3,
        }
    }
}
