use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bounding box ({x}, {y}, {w}, {h}): {reason}")]
    InvalidBox {
        x: f64,
        y: f64,
        w: f64,
        h: f64,
        reason: &'static str,
    },

    #[error("invalid tracklet {id}: {reason}")]
    InvalidTracklet { id: u64, reason: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("fps mismatch between tracklets {a} ({fps_a}) and {b} ({fps_b})")]
    FpsMismatch { a: u64, b: u64, fps_a: f64, fps_b: f64 },

    #[error("prediction for unknown track id {id} at frame {frame}")]
    UnknownTrack { id: u64, frame: u32 },

    #[error("frames out of order: {got} after {previous}")]
    FrameOrder { previous: u32, got: u32 },

    #[error("duplicate row for id {id} at frame {frame}")]
    DuplicateRow { id: i64, frame: u32 },

    #[error("empty pool for requested category `{0}`")]
    EmptyPool(&'static str),

    #[error("too many tracklets for exhaustive enumeration: {got} > {max}")]
    TooManyTracklets { got: usize, max: usize },

    #[error("{}, line {line}: {reason}", path.display())]
    Parse { path: PathBuf, line: usize, reason: String },

    #[error("cannot access {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
