use std::path::PathBuf;

use thiserror::Error;
use vertseq_nn::NnError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("data length mismatch: header declares {expected_bytes} payload bytes, found {found_bytes}")]
    DataLength {
        expected_bytes: usize,
        found_bytes: usize,
    },
    #[error("invalid volume: {0}")]
    InvalidVolume(String),
    #[error("HU value {value} at voxel {index} outside [-1024, 3071]")]
    HuOutOfRange { value: i16, index: usize },
    #[error("invalid phantom request: {0}")]
    Phantom(String),
    #[error("malformed manifest: {0}")]
    Manifest(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error("training data needs both classes: {0}")]
    SingleClass(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }
}
