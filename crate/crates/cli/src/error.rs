use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{origin}:{line}:{column}: {message}")]
    Parse { origin: String, line: usize, column: usize, message: String },
    #[error("{origin}: invalid scenario: {message}")]
    Validation { origin: String, message: String },
    #[error("unknown scenario {0:?} (not a file, not a shipped name; see --list)")]
    UnknownScenario(String),
    #[error("invalid override {0:?}")]
    Override(String),
    #[error("task {task}: no series to plot")]
    MissingSeries { task: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// Process exit status: 2 for parse errors, 3 for validation errors, 1
    /// otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse { .. } => 2,
            CliError::Validation { .. } | CliError::UnknownScenario(_) | CliError::Override(_) => 3,
            CliError::MissingSeries { .. } | CliError::Io { .. } => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
