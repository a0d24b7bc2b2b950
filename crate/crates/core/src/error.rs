use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite sample at index {index} in {what}")]
    NonFinite { what: &'static str, index: usize },

    #[error("elevation {0} rad outside [-pi/2, pi/2]")]
    ElevationOutOfRange(f64),

    #[error("sample rate mismatch: {0} Hz vs {1} Hz")]
    SampleRateMismatch(u32, u32),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("invalid STFT parameters: {0}")]
    InvalidStft(String),

    #[error("expected 4 channels, file has {0}")]
    ChannelCount(u16),

    #[error("unsupported WAV encoding: {0}")]
    UnsupportedEncoding(String),

    #[error("truncated file: {0}")]
    Truncated(String),

    #[error("malformed WAV: {0}")]
    MalformedWav(String),

    #[error("malformed binary file: {0}")]
    MalformedBinary(String),

    #[error("not enough latents for k-means: {have} vectors for {want} codes, supply more data")]
    NotEnoughLatents { have: usize, want: usize },

    #[error("dimension mismatch: codebook has {codebook}, latents have {latents}")]
    DimensionMismatch { codebook: usize, latents: usize },

    #[error("index {index} out of range for codebook of {size} entries")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("no directional energy: every time-frequency bin is masked")]
    NoDirectionalEnergy,

    #[error("missing audio for source id {0:?}")]
    MissingAudio(String),

    #[error("scene must have 1 to 5 directional sources, got {0}")]
    SourceCount(usize),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] io::Error),
}
