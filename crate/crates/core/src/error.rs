use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("schema violation: {0}")]
    Schema(String),

    #[error("annotation {annotation} references unknown image {image}")]
    DanglingReference { annotation: u64, image: u64 },

    #[error("detection on image {image} has score {score} outside [0, 1]")]
    ScoreRange { image: u64, score: f64 },

    #[error("io error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("source dataset has no images")]
    EmptySource,

    #[error("image file missing: {0}")]
    MissingImageFile(PathBuf),

    #[error("image {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("scale plan has no entry for image {0}")]
    PlanCoverage(u64),

    #[error("invalid tile overlap {overlap} for tile {tile_w}x{tile_h}")]
    InvalidOverlap { overlap: u32, tile_w: u32, tile_h: u32 },

    #[error("detection references tile image {0} with no provenance record")]
    UnknownTile(u64),

    #[error("detection references image {0} absent from ground truth")]
    ImageIdMismatch(u64),

    #[error("box of size {w:.3}x{h:.3} cannot be placed in a {width}x{height} image")]
    InfeasiblePlacement { w: f64, h: f64, width: u32, height: u32 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
