use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read image {path}: {reason}")]
    UnreadableFile { path: PathBuf, reason: String },

    #[error("unsupported bit depth in {path}: {color_type}, only 8-bit channels are accepted")]
    UnsupportedBitDepth { path: PathBuf, color_type: String },

    #[error("gray level count must be at least 2, got {0}")]
    InvalidBinCount(usize),

    #[error("mask is {mask_width}x{mask_height} but image is {image_width}x{image_height}")]
    DimensionMismatch {
        mask_width: usize,
        mask_height: usize,
        image_width: usize,
        image_height: usize,
    },

    #[error("invalid tile spec: {0}")]
    InvalidTileSpec(String),

    #[error("no tile passes the mask coverage test")]
    EmptyGrid,

    #[error("tile {tile_id} has no co-occurring pixel pairs")]
    NoValidPairs { tile_id: usize },

    #[error("invalid GLCM parameters: {0}")]
    InvalidGlcmParams(String),

    #[error("invalid feature matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid FCM configuration: {0}")]
    InvalidFcmConfig(String),

    #[error("{points} points cannot be split into {clusters} clusters")]
    TooFewPoints { points: usize, clusters: usize },

    #[error("score out of range: {0}")]
    OutOfRangeScore(String),

    #[error("annotation references unknown tile {0}")]
    UnknownTile(i64),

    #[error("class-level score references unknown class {0}")]
    UnknownClass(usize),

    #[error("no class-level score for class {0}")]
    MissingClassScore(usize),

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("malformed {what}: {reason}")]
    Parse { what: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short variant name, used on the diagnostic stream by the CLI.
    pub fn name(&self) -> &'static str {
        match self {
            Error::UnreadableFile { .. } => "UnreadableFile",
            Error::UnsupportedBitDepth { .. } => "UnsupportedBitDepth",
            Error::InvalidBinCount(_) => "InvalidBinCount",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::InvalidTileSpec(_) => "InvalidTileSpec",
            Error::EmptyGrid => "EmptyGrid",
            Error::NoValidPairs { .. } => "NoValidPairs",
            Error::InvalidGlcmParams(_) => "InvalidGlcmParams",
            Error::InvalidMatrix(_) => "InvalidMatrix",
            Error::InvalidFcmConfig(_) => "InvalidFcmConfig",
            Error::TooFewPoints { .. } => "TooFewPoints",
            Error::OutOfRangeScore(_) => "OutOfRangeScore",
            Error::UnknownTile(_) => "UnknownTile",
            Error::UnknownClass(_) => "UnknownClass",
            Error::MissingClassScore(_) => "MissingClassScore",
            Error::MissingData(_) => "MissingData",
            Error::Parse { .. } => "ParseError",
            Error::Io(_) => "IoError",
            Error::Image(_) => "ImageError",
            Error::Csv(_) => "CsvError",
            Error::Json(_) => "JsonError",
        }
    }
}
