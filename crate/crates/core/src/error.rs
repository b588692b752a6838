use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the enhancement pipeline, metrics and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Read {
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
    #[error("failed to decode {path}: {message}")]
    Decode { path: PathBuf, message: String },
    #[error("failed to encode {path}: {message}")]
    Encode { path: PathBuf, message: String },
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("image has zero width or height")]
    EmptyImage,
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("image {width}x{height} is smaller than the {grid_x}x{grid_y} tile grid")]
    ImageSmallerThanTiles {
        width: usize,
        height: usize,
        grid_x: usize,
        grid_y: usize,
    },
    #[error("image {width}x{height} is too small for a {levels}-level pyramid")]
    TooSmallForPyramid {
        width: usize,
        height: usize,
        levels: usize,
    },
    #[error("image {width}x{height} is smaller than the {window}x{window} SSIM window")]
    SmallerThanWindow {
        width: usize,
        height: usize,
        window: usize,
    },
    #[error("region of interest is empty")]
    EmptyMask,
    #[error("expected {expected} weight maps, got {actual}")]
    StackSizeMismatch { expected: usize, actual: usize },
    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
