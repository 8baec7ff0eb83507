use std::path::{Path, PathBuf};

use thiserror::Error;

/// Pipeline failure, mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config schema: {0}")]
    Schema(String),
    #[error("cannot derive parameter: {0}")]
    Derive(String),
    #[error("incomplete data: {0}")]
    Incomplete(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn other(e: impl std::fmt::Display) -> Self {
        CliError::Other(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Derive(_) => 3,
            CliError::Incomplete(_) => 4,
            CliError::Io { .. } | CliError::Other(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
