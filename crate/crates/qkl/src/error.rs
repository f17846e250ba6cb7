use std::path::Path;

/// Errors surfaced by the runner and CLI. The variant decides the exit code.
#[derive(Debug, thiserror::Error)]
pub enum QklError {
    /// Bad flags, ranges or configuration.
    #[error("{0}")]
    Validation(String),

    #[error(transparent)]
    Core(#[from] qkl_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    /// Malformed input file.
    #[error("{0}")]
    Format(String),

    /// A verification ran to completion but some assertion did not hold.
    #[error("{0}")]
    CheckFailed(String),
}

pub type Result<T> = std::result::Result<T, QklError>;

impl QklError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        QklError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            QklError::Validation(_) => 1,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for QklError {
    fn from(source: std::io::Error) -> Self {
        QklError::Io {
            path: String::from("<stream>"),
            source,
        }
    }
}
