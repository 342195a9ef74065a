//! Process-level error taxonomy. Every failure funnels into one of four
//! stable exit codes so scripts can branch on what went wrong:
//! 2 = bad configuration, 3 = I/O, 4 = numeric abort, 5 = artifact mismatch.

use std::path::PathBuf;

use analogic_core::CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    /// Rejected configuration: bad flag values, malformed config files,
    /// out-of-range hyperparameters. Exit code 2.
    #[error("invalid config: {0}")]
    Config(String),

    /// Filesystem trouble, always with the offending path. Exit code 3.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A non-finite value where training must stop, or a numeric
    /// verification that failed. Exit code 4.
    #[error("numeric abort: {0}")]
    NonFinite(String),

    /// Inputs that are individually fine but disagree with each other:
    /// checkpoint vs manifest shapes, corrupted artifacts, split-hygiene
    /// violations. Exit code 5.
    #[error("artifact mismatch: {0}")]
    Mismatch(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Io { .. } => 3,
            AppError::NonFinite(_) => 4,
            AppError::Mismatch(_) => 5,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<CoreError> for AppError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidConfig(m) => AppError::Config(m),
            CoreError::ShapeMismatch(m) => AppError::Mismatch(m),
            CoreError::NonFinite(m) | CoreError::DomainViolation(m) => AppError::NonFinite(m),
        }
    }
}

pub type Result<T, E = AppError> = std::result::Result<T, E>;
