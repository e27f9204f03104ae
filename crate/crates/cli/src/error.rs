use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] diffnet_core::Error),

    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// TOML-level problems; the detail carries the parser's line/column
    /// diagnostics.
    #[error("config error in {path}:\n{detail}")]
    Config { path: PathBuf, detail: String },

    /// Semantic problems in an otherwise well-formed config.
    #[error("config error: {0}")]
    Validation(String),
}
