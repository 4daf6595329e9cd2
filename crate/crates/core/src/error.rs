use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated {what}: expected {expected} bytes, got {actual}")]
    Truncated {
        what: &'static str,
        expected: u64,
        actual: u64,
    },

    #[error("non-finite value at element {index}")]
    NonFinite { index: usize },

    #[error("dimension overflow: {0}")]
    DimensionOverflow(String),

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("region {region} out of bounds for {width}x{height} map")]
    RegionOutOfBounds {
        region: String,
        width: usize,
        height: usize,
    },

    #[error("invalid level {0}")]
    InvalidLevel(u32),

    #[error("invalid grid spec: {0}")]
    InvalidGrid(String),

    #[error("invalid bounding box: {0}")]
    InvalidBbox(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("image {image_id:?}: {message}")]
    Resolution { image_id: String, message: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("ground truth: {0}")]
    GroundTruth(String),

    #[error("index: {0}")]
    Index(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
