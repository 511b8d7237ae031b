use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("PNG encoding failed: {0}")]
    PngEncode(#[from] png::EncodingError),

    #[error("PNG decoding failed: {0}")]
    PngDecode(#[from] png::DecodingError),

    #[error("image decoding failed: {0}")]
    Image(#[from] image::ImageError),

    #[error("label image must be 8-bit indexed or grayscale, found {0}")]
    UnsupportedLabelFormat(String),

    #[error("label value {value} at ({x}, {y}) is not a class index or void")]
    InvalidLabel { value: u8, x: u32, y: u32 },

    #[error("buffer of {len} elements does not match {width}x{height} (x{channels})")]
    BadBuffer {
        len: usize,
        width: u32,
        height: u32,
        channels: usize,
    },

    #[error("dimension mismatch{}: expected {expected:?}, found {found:?}", context.as_deref().map(|c| format!(" for {c}")).unwrap_or_default())]
    DimensionMismatch {
        expected: (u32, u32),
        found: (u32, u32),
        context: Option<String>,
    },

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("unknown class name {0:?}")]
    UnknownClass(String),

    #[error("class index {0} is not a foreground class (expected 1..=20)")]
    NotForeground(u8),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unresolvable asset reference {0:?}")]
    MissingAsset(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("no prediction for ground-truth image {0:?}")]
    MissingPrediction(String),

    #[error("missing source image for {0:?}")]
    MissingImage(String),

    #[error("prediction contains void label 255 at ({x}, {y})")]
    VoidInPrediction { x: u32, y: u32 },

    #[error("expected {expected} masks, got {found}")]
    CountMismatch { expected: usize, found: usize },

    #[error("no class has a defined IoU")]
    NoDefinedClass,

    #[error("unknown stage {0:?} (expected `baseline` or `synthetic`)")]
    UnknownStage(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
