use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed json in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("malformed csv in {path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("bad feature file {path}: {message}")]
    FeatureFormat { path: PathBuf, message: String },

    #[error("dimension mismatch: video {video} has d={found}, expected d={expected}")]
    DimensionMismatch {
        video: String,
        expected: usize,
        found: usize,
    },

    #[error("unknown group label {group:?} for video {video}")]
    UnknownGroup { video: String, group: String },

    #[error("non-finite value in features of video {video} at row {row}, col {col}")]
    NonFinite { video: String, row: usize, col: usize },

    #[error("duplicate {what}: {key}")]
    Duplicate { what: &'static str, key: String },

    #[error("invalid annotation: {0}")]
    Annotation(String),

    #[error("clip count s={s} exceeds {t} clips in video {video}")]
    SummaryTooLarge { video: String, s: usize, t: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("{what} exceeds cap: {size} > {cap}")]
    CapExceeded {
        what: &'static str,
        size: u128,
        cap: u128,
    },

    #[error("video {video} has {total_frames} frames, fewer than the minimum clip length {min_len}")]
    TooFewFrames {
        video: String,
        total_frames: usize,
        min_len: usize,
    },

    #[error("clip [{start}, {end}) overlaps no feature rows")]
    EmptyClip { start: usize, end: usize },

    #[error("no positive labels and no rank cutoff")]
    NoPositives,

    #[error("missing prediction for video {0}")]
    MissingPrediction(String),

    #[error("empty input: {0}")]
    Empty(&'static str),
}

impl Error {
    /// Stable machine-readable code, used by the CLI error JSON.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
            Error::Csv { .. } => "csv",
            Error::FeatureFormat { .. } => "feature_format",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::UnknownGroup { .. } => "unknown_group",
            Error::NonFinite { .. } => "non_finite",
            Error::Duplicate { .. } => "duplicate",
            Error::Annotation(_) => "annotation",
            Error::SummaryTooLarge { .. } => "summary_too_large",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::CapExceeded { .. } => "cap_exceeded",
            Error::TooFewFrames { .. } => "too_few_frames",
            Error::EmptyClip { .. } => "empty_clip",
            Error::NoPositives => "no_positives",
            Error::MissingPrediction(_) => "missing_prediction",
            Error::Empty(_) => "empty",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
