use std::path::Path;

use gdu_core::GduError;
use thiserror::Error;

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] GduError),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error("missing data file {0}")]
    MissingData(String),

    #[error("{method} seed {seed}: {source}")]
    Run {
        method: String,
        seed: u64,
        source: GduError,
    },

    #[error("empty hypothesis list")]
    NoHypotheses,

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        if source.kind() == std::io::ErrorKind::NotFound {
            return HarnessError::MissingData(path.display().to_string());
        }
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
