use std::path::PathBuf;

use thiserror::Error;
use wavemap_spectral::modulation::ModulationError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("all {0} rows of the {1} sweep failed")]
    AllFailed(usize, &'static str),
    #[error("stable-manifold shooting failed: {0}")]
    Shooting(#[from] ModulationError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 64,
            Self::AllFailed(..) => 2,
            Self::Shooting(_) => 3,
            Self::Io { .. } => 74,
        }
    }
}
