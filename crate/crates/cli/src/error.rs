use std::path::{Path, PathBuf};

use thiserror::Error;

/// Failures before or around a solve. All of them map to exit code 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Solver(#[from] gtrs_core::Error),
}

impl CliError {
    pub fn parse(path: &Path, message: &str) -> Self {
        CliError::Parse {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_TOLERANCE: i32 = 2;
