use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("{}: malformed file: {reason}", path.display())]
    MalformedFile { path: PathBuf, reason: String },

    #[error("{}:{line}:{column}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, column: usize, message: String },

    #[error("manifest has {} problem(s):\n  {}", .0.len(), .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("no scribble file for image `{0}`")]
    MissingScribble(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] scribsim_core::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Error::MalformedFile { path: path.into(), reason: reason.to_string() }
    }

    /// Errors caused by bad user input rather than by a single image.
    pub fn is_configuration(&self) -> bool {
        matches!(self, Error::Parse { .. } | Error::Validation(_) | Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
