use std::path::{Path, PathBuf};

/// Failures of the command-line layer, each with a stable exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Numerical(#[from] dqd_core::Error),

    #[error("check failed: {0}")]
    Check(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: malformed artifact: {reason}", path.display())]
    Artifact { path: PathBuf, reason: String },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) | CliError::Check(_) | CliError::Artifact { .. } => 2,
            CliError::Io { .. } => 3,
        }
    }
}
