//! Library side of the `currsched` command-line tool.

pub mod commands;
pub mod config;

use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or config values; exit code 2.
    #[error("usage: {0}")]
    Usage(String),
    /// Unreadable or inconsistent input data; exit code 3.
    #[error("{0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) | CliError::Io { .. } => 3,
        }
    }
}

impl From<currsched_core::Error> for CliError {
    fn from(e: currsched_core::Error) -> Self {
        match e {
            currsched_core::Error::InvalidArgument(msg) => CliError::Usage(msg),
            other => CliError::Data(other.to_string()),
        }
    }
}

pub const EXIT_CAP_REACHED: i32 = 4;
