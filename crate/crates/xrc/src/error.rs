use std::path::PathBuf;

use thiserror::Error;

/// Error type shared across the pipeline.
///
/// The CLI maps variants to exit codes: config errors exit 2, data errors
/// exit 3, everything else 4.
#[derive(Debug, Error)]
pub enum XrcError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("missing image file: {}", .0.display())]
    MissingImage(PathBuf),

    #[error("insufficient records for class {class}: need {needed}, have {available} (short {})", .needed - .available)]
    InsufficientRecords {
        class: String,
        needed: usize,
        available: usize,
    },

    #[error("insufficient pool in phase {phase} for class {class}: need {needed}, have {available}")]
    InsufficientPool {
        phase: usize,
        class: String,
        needed: usize,
        available: usize,
    },

    #[error("model error: {0}")]
    Model(String),

    #[error("training aborted at fold {fold} phase {phase} epoch {epoch}: {reason}")]
    Training {
        fold: usize,
        phase: usize,
        epoch: usize,
        reason: String,
    },

    #[error("io error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl XrcError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        XrcError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            XrcError::Config(_) => 2,
            XrcError::Data(_)
            | XrcError::MissingImage(_)
            | XrcError::InsufficientRecords { .. }
            | XrcError::InsufficientPool { .. }
            | XrcError::Csv(_) => 3,
            _ => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, XrcError>;
