use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::checkpoint::CheckpointError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{0}")]
    Model(llbar_core::Error),

    #[error("{0}")]
    BlowUp(llbar_core::Error),

    #[error("acceptance threshold failed: {0}")]
    Assert(String),

    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },

    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),

    #[error("output format error: {0}")]
    Format(String),
}

impl HarnessError {
    /// Process exit code: 2 config, 3 blow-up, 4 assertion, 5 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Model(_) => 2,
            HarnessError::BlowUp(_) => 3,
            HarnessError::Assert(_) => 4,
            HarnessError::Io { .. } | HarnessError::Checkpoint(_) | HarnessError::Format(_) => 5,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<llbar_core::Error> for HarnessError {
    fn from(e: llbar_core::Error) -> Self {
        match e {
            llbar_core::Error::BlowUp { .. } => HarnessError::BlowUp(e),
            other => HarnessError::Model(other),
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
