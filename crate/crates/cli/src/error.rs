use std::path::PathBuf;

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] levymor::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Io { .. } => "Io",
            CliError::Parse { .. } => "Parse",
            CliError::Invalid(_) => "InvalidConfig",
        }
    }

    /// `{"error": kind, "message": text}`.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            error: &'a str,
            message: String,
        }
        serde_json::to_string(&Report {
            error: self.kind(),
            message: self.to_string(),
        })
        .expect("error report serializes")
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
