use std::path::PathBuf;

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A scan-geometry precondition was violated (point behind the source
    /// line, unmappable ray, invalid configuration values).
    #[error("geometry error: {0}")]
    Geometry(String),

    /// An argument outside its documented domain.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Array dimensions do not match between operands.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A configuration key is missing, unparsable or has an invalid value.
    #[error("config error: key `{key}`: {message}")]
    Config { key: String, message: String },

    /// File container parse failure.
    #[error("container error in {path:?}: {message}")]
    Container { path: PathBuf, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { key: key.into(), message: message.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
