use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("pixel ({row}, {col}) is not covered by any patch")]
    Coverage { row: usize, col: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot decode image {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("unsupported bit depth in {path}: {color}")]
    UnsupportedDepth { path: PathBuf, color: String },

    #[error(transparent)]
    Model(#[from] ModelFormatError),
}

/// Failures while decoding a `.ddsr` model file.
#[derive(Debug, Error)]
pub enum ModelFormatError {
    #[error("bad magic tag {found:?}")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported model format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("truncated payload in section `{section}`: needed {needed} bytes, {available} left")]
    Truncated {
        section: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("corrupt section `{section}`: {message}")]
    Corrupt {
        section: &'static str,
        message: String,
    },

    #[error("{} trailing bytes after model payload", .0)]
    TrailingBytes(usize),
}

pub(crate) fn dim_err(msg: impl Into<String>) -> Error {
    Error::Dimension(msg.into())
}
