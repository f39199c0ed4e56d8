use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("malformed rule `{rule}`: {reason}")]
    MalformedRule { rule: String, reason: String },

    #[error("malformed symbol string at position {position}: {reason}")]
    MalformedString { position: usize, reason: &'static str },

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("crop {crop:?} does not fit inside image of size {image:?}")]
    CropTooLarge {
        crop: (usize, usize),
        image: (usize, usize),
    },

    #[error("value {value} at index {index} is outside [0, 1]")]
    ValueOutOfRange { index: usize, value: f64 },

    #[error("no curvilinear pixels to anchor CMCL")]
    NoAnchorPixels,

    #[error("degenerate batch: {0}")]
    DegenerateBatch(&'static str),

    #[error("tensor format: {0}")]
    Format(String),

    #[error("config: {0}")]
    Config(String),

    #[error("no readable images in {0}")]
    EmptyTargetDir(PathBuf),

    #[error("sample {index} (seed {seed:#018x}) failed: {source}")]
    Sample {
        index: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
