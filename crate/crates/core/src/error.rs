use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("non-finite value {value} at ({x}, {y})")]
    NonFinite { x: usize, y: usize, value: f64 },

    #[error("value {value} at ({x}, {y}) is outside the normalized range [-1, 1]")]
    NotNormalized { x: usize, y: usize, value: f64 },

    #[error("score map is already normalized")]
    AlreadyNormalized,

    #[error("duplicate channel name `{0}`")]
    DuplicateChannel(String),

    #[error("missing channel `{0}`")]
    MissingChannel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("not enough eligible {class} pixels: needed {needed}, found {available}")]
    SampleShortfall {
        class: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("kernel learning failed: {0}")]
    KernelLearning(String),

    #[error("{0}")]
    Degenerate(String),

    #[error("model format: {0}")]
    Format(String),

    #[error("unsupported model version {found} (this build reads version {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
