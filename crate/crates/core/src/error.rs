use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A scenario parameter violates one of the configuration invariants.
    #[error("configuration invariant `{invariant}` violated: {detail}")]
    Config {
        invariant: &'static str,
        detail: String,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not Hermitian (relative residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("matrix is not positive definite (minimum eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("covariance is ill-conditioned (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("task matrix has no nonzero singular values; water level is unbounded")]
    DegenerateTask,

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("sweep point {grid_index} (value {grid_value}): {source}")]
    SweepPoint {
        grid_index: usize,
        grid_value: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Runtime,
    Io,
}

impl Error {
    pub(crate) fn config(invariant: &'static str, detail: impl Into<String>) -> Self {
        Error::Config {
            invariant,
            detail: detail.into(),
        }
    }

    pub(crate) fn in_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config { .. } => ErrorCategory::Config,
            Error::Io { .. } | Error::Json { .. } => ErrorCategory::Io,
            Error::Stage { source, .. } | Error::SweepPoint { source, .. } => source.category(),
            _ => ErrorCategory::Runtime,
        }
    }
}
