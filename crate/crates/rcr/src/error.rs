use std::path::{Path, PathBuf};

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read or write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("invalid input: {0}")]
    Invalid(String),
    /// The inputs were fine but the stage did not produce a result.
    #[error("{0}")]
    Stage(String),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Error {
        Error::Io { path: path.to_path_buf(), source }
    }

    pub fn format(path: &Path, msg: impl ToString) -> Error {
        Error::Format { path: path.to_path_buf(), msg: msg.to_string() }
    }

    /// 2 for missing or malformed inputs, 1 for stage failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage(_) => 1,
            _ => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
            Error::Invalid(_) => "invalid_input",
            Error::Stage(_) => "stage_failure",
        }
    }

    /// Machine-readable form written to stderr by the CLI.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            error: &'a str,
            message: String,
            exit_code: i32,
        }
        serde_json::to_string(&Report { error: self.kind(), message: self.to_string(), exit_code: self.exit_code() })
            .unwrap_or_else(|_| String::from("{\"error\":\"unknown\"}"))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
