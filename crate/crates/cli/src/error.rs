use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] aif_core::Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn input(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Self::Input {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for invalid input, 3 for numerical failures, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        use aif_core::Error as E;
        match self {
            Self::Usage(_) | Self::Input { .. } => 2,
            Self::Io { .. } => 4,
            Self::Core(e) => match e {
                E::ConvergenceFailure { .. }
                | E::DegenerateNormal
                | E::EmptyRegion { .. }
                | E::DegenerateVariance => 3,
                _ => 2,
            },
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
