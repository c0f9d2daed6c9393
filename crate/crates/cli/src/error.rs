use thiserror::Error;

/// Failures of the front-end. All of them map to exit code 3.
#[derive(Debug, Error)]
pub enum CliError {
    /// A field of the specification failed validation.
    #[error("{path}: {message}")]
    Input { path: String, message: String },

    /// Malformed JSON; `message` already names the position.
    #[error("{message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn input(path: impl Into<String>, message: impl std::fmt::Display) -> Self {
        CliError::Input { path: path.into(), message: message.to_string() }
    }

    pub fn from_json(e: &serde_json::Error) -> Self {
        CliError::Parse { line: e.line(), column: e.column(), message: e.to_string() }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
