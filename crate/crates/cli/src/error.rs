use spcfr_core::{GameError, SolverError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Parse { path: String, source: GameError },
    #[error("{0}")]
    SizeGuard(GameError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    /// 2 for configuration errors, 3 for game-file parse errors, 4 for size
    /// guards, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Solver(SolverError::Config(_)) => 2,
            CliError::Parse { .. } => 3,
            CliError::SizeGuard(_) => 4,
            CliError::Solver(_) | CliError::Io { .. } => 1,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn from_game(path: &str, e: GameError) -> Self {
        match e {
            GameError::TooLarge { .. } => CliError::SizeGuard(e),
            GameError::InvalidParameter(m) => CliError::Config(m),
            source => CliError::Parse {
                path: path.to_string(),
                source,
            },
        }
    }
}
