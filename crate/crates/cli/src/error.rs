use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("no manifest.json in {}", .0.display())]
    MissingManifest(PathBuf),
    #[error("corrupt manifest: {0}")]
    CorruptManifest(String),
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] robin_core::Error),
}

impl LabError {
    /// Process exit status: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::ConfigInvalid(_) => 2,
            _ => 1,
        }
    }
}

pub type LabResult<T> = std::result::Result<T, LabError>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> LabError {
    let path = path.into();
    move |source| LabError::Io { path, source }
}
