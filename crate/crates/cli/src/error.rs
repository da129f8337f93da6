use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("input not found: {}", .0.display())]
    MissingInput(PathBuf),

    #[error("output directory {} is locked by another run ({})", .0.display(), .1.display())]
    Locked(PathBuf, PathBuf),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("self-test failed: {0}")]
    SelfTest(String),

    #[error(transparent)]
    Core(#[from] xmaml_core::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        if source.kind() == std::io::ErrorKind::NotFound {
            CliError::MissingInput(path.to_path_buf())
        } else {
            CliError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    }

    /// 2 for bad invocations and missing inputs, 3 for stale checkpoints, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::MissingInput(_) => 2,
            CliError::Core(xmaml_core::Error::Io { source, .. }) if source.kind() == std::io::ErrorKind::NotFound => 2,
            CliError::Core(xmaml_core::Error::StaleCheckpoint { .. }) => 3,
            _ => 1,
        }
    }
}
