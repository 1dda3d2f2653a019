use std::path::PathBuf;

/// Failures of the command-line pipeline, each with a stable exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad file {}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("alignment failed: {0}")]
    Alignment(#[source] edof_core::Error),
    #[error("fusion failed: {0}")]
    Fusion(#[source] edof_core::Error),
    #[error("training diverged: {0}")]
    Diverged(#[source] edof_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } | CliError::Format { .. } => 3,
            CliError::Alignment(_) => 4,
            CliError::Fusion(_) => 5,
            CliError::Diverged(_) => 6,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        CliError::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Maps a core error raised while fusing or training.
    pub(crate) fn fusion(e: edof_core::Error) -> Self {
        match e {
            edof_core::Error::TrainingDiverged { .. } => CliError::Diverged(e),
            _ => CliError::Fusion(e),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
