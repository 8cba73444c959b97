use std::path::PathBuf;

use onode::error::{CheckpointError, Error as CoreError};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("output directory {0} is locked by another run (remove .lock if stale)")]
    Locked(PathBuf),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) | CliError::Locked(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::Io { .. } | CoreError::Idx(_) | CoreError::Checkpoint(CheckpointError::Parse(_)) => {
                CliError::Io(msg)
            }
            CoreError::NonFinite(_) | CoreError::State(_) => CliError::Numeric(msg),
            CoreError::Shape { .. }
            | CoreError::Argument(_)
            | CoreError::Config(_)
            | CoreError::Checkpoint(_) => CliError::Config(msg),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
