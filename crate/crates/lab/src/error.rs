use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] perc_core::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: io::Error },
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 2,
            LabError::Core(perc_core::Error::InfeasibleEnumeration { .. }) => 3,
            LabError::Core(perc_core::Error::Regime(_)) => 4,
            LabError::Core(perc_core::Error::Argument(_)) => 2,
            LabError::Core(_) | LabError::Io { .. } => 1,
        }
    }

    pub(crate) fn io(path: impl Into<String>) -> impl FnOnce(io::Error) -> LabError {
        let path = path.into();
        move |source| LabError::Io { path, source }
    }
}

pub type LabResult<T> = std::result::Result<T, LabError>;
