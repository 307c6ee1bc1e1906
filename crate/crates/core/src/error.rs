use std::io;

use thiserror::Error;

/// Errors produced by the codec and its file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("truncated stream: decoder ran past the end of the payload")]
    TruncatedStream,

    #[error("empty input")]
    EmptyInput,

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
