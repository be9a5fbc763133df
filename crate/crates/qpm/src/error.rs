use std::path::PathBuf;

use serde::Serialize;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Core(#[from] qpm_core::Error),

    #[error("{0}")]
    Validation(String),

    /// The command ran but its contract was not met.
    #[error("{0}")]
    Unmet(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        CliError::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Format { .. } => "format",
            CliError::Json(_) => "json",
            CliError::Csv(_) => "csv",
            CliError::Core(e) => match e {
                qpm_core::Error::Parameter(_) | qpm_core::Error::Shape(_) => "validation",
                qpm_core::Error::RecoveryFailed { .. } | qpm_core::Error::Round { .. } => "recovery",
                qpm_core::Error::Size(_) => "size",
                qpm_core::Error::Contract(_) => "contract",
                _ => "internal",
            },
            CliError::Validation(_) => "validation",
            CliError::Unmet(_) => "unmet",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "validation" => 2,
            "unmet" | "recovery" => 3,
            _ => 1,
        }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Wire<'a> {
            error: &'a str,
            message: String,
        }
        serde_json::to_string(&Wire {
            error: self.kind(),
            message: self.to_string(),
        })
        .expect("plain strings serialize")
    }
}
