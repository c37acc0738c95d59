use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Library(#[from] ergomoment::Error),

    #[error("{message}")]
    Input { code: &'static str, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn input(code: &'static str, message: impl Into<String>) -> Self {
        CliError::Input {
            code,
            message: message.into(),
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Library(e) => e.code(),
            CliError::Input { code, .. } => code,
            CliError::Io { .. } => "E_IO",
        }
    }

    /// Classifies a JSON error: syntax, unknown tag, or schema violation.
    pub fn from_json(context: &str, e: serde_json::Error) -> Self {
        use serde_json::error::Category;
        let code = match e.classify() {
            Category::Syntax | Category::Eof => "E_JSON",
            Category::Io => "E_IO",
            Category::Data if e.to_string().contains("unknown variant") => "E_UNKNOWN_KIND",
            Category::Data => "E_SCHEMA",
        };
        CliError::input(code, format!("{context}: {e}"))
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
