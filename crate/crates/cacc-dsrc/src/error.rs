use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    /// A check (coefficient comparison, sanity suite) failed.
    pub const CHECK_FAILED: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const INVARIANT: u8 = 3;
    pub const IO: u8 = 4;
}

#[derive(Debug, Error)]
pub enum AppError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invariant breach: {0}")]
    Invariant(String),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    CheckFailed(String),
}

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::Config(_) => exit::CONFIG,
            AppError::Invariant(_) => exit::INVARIANT,
            AppError::Io { .. } => exit::IO,
            AppError::CheckFailed(_) => exit::CHECK_FAILED,
        }
    }
}

impl From<cacc_dsrc_core::Error> for AppError {
    fn from(e: cacc_dsrc_core::Error) -> Self {
        match e {
            cacc_dsrc_core::Error::InvariantBreach { .. } => AppError::Invariant(e.to_string()),
            other => AppError::Config(other.to_string()),
        }
    }
}

pub type AppResult<T> = Result<T, AppError>;
