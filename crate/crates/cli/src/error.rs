use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{message}")]
    Config { message: String, key: Option<String> },

    #[error("unknown score `{name}`")]
    UnknownScore { name: String, valid: Vec<&'static str> },

    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] mia_core::Error),
}

impl CliError {
    pub fn input(path: &Path, message: impl Into<String>) -> Self {
        CliError::Input { path: path.to_path_buf(), message: message.into() }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    /// Maps a serde error to a config error, pulling out the offending key.
    pub fn from_serde(err: serde_json::Error) -> Self {
        let message = err.to_string();
        let key = ["missing field `", "unknown field `"].iter().find_map(|pat| {
            let rest = &message[message.find(pat)? + pat.len()..];
            Some(rest[..rest.find('`')?].to_string())
        });
        CliError::Config { message, key }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(mia_core::Error::SingleClass { .. }) => 3,
            _ => 2,
        }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> Value {
        let kind = match self {
            CliError::Usage(_) => "usage",
            CliError::Config { .. } => "config",
            CliError::UnknownScore { .. } => "unknown_score",
            CliError::Input { .. } => "input",
            CliError::Io { .. } => "io",
            CliError::Core(_) if self.exit_code() == 3 => "numerical",
            CliError::Core(_) => "invalid",
        };
        let mut v = json!({ "error": kind, "message": self.to_string() });
        match self {
            CliError::Config { key: Some(key), .. } => v["key"] = json!(key),
            CliError::UnknownScore { name, valid } => {
                v["name"] = json!(name);
                v["valid"] = json!(valid);
            }
            CliError::Input { path, .. } | CliError::Io { path, .. } => v["path"] = json!(path),
            _ => {}
        }
        v
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
