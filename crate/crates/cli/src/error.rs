use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    ConfigInvalid(String),

    #[error("stage input {} does not exist", .0.display())]
    StageInputMissing(PathBuf),

    #[error(transparent)]
    Core(#[from] cishtex_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn name(&self) -> &'static str {
        match self {
            CliError::ConfigInvalid(_) => "ConfigInvalid",
            CliError::StageInputMissing(_) => "StageInputMissing",
            CliError::Core(e) => e.name(),
            CliError::Io(_) => "IoError",
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
