use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: empty phoneme inventory")]
    EmptyInventory { path: PathBuf },
    #[error("duplicate phoneme symbol `{0}`")]
    DuplicateSymbol(String),
    #[error("utterance `{utterance}`: unknown phoneme symbol `{symbol}`")]
    UnknownSymbol { utterance: String, symbol: String },
    #[error("unknown phoneme id {0}")]
    UnknownPhonemeId(usize),
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("utterance `{utterance}`: audio file {path} does not exist")]
    MissingAudio { utterance: String, path: PathBuf },
    #[error("{path}: {message}")]
    Wav { path: PathBuf, message: String },
    #[error("unsupported sample rate {0} Hz (expected 16000)")]
    SampleRate(u32),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("{0}")]
    InvalidArgument(String),
    #[error("sequence of {frames} frames is too short for {required} emitting steps")]
    TooShort { frames: usize, required: usize },
    #[error("{0}: bad model file")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(expected: usize, actual: usize) -> Self {
        Error::Dimension { expected, actual }
    }
}
