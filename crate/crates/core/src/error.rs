use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {reason}")]
    UnreadableFile { path: PathBuf, reason: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("{0}: file carries no usable orientation (qform_code and sform_code are both 0)")]
    MissingOrientation(PathBuf),

    #[error("cannot write {path}: {reason}")]
    UnwritablePath { path: PathBuf, reason: String },

    #[error("label value {value} at voxel {index} is not one of 0, 1, 2")]
    InvalidLabelValue { value: u8, index: usize },

    #[error("grid mismatch: {0}")]
    DimsMismatch(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("seed voxel {0:?} is not set in the mask")]
    SeedNotInForeground([usize; 3]),

    #[error("metric undefined: {0}")]
    MetricUndefined(String),

    #[error("confidence interval undefined for n = {n} at level {level}")]
    CIUndefined { n: usize, level: f64 },

    #[error("no axial slice contains air voxels")]
    NoAirSlices,

    #[error("training scan {0} has no label map")]
    MissingLabel(String),

    #[error("unknown scan {0}")]
    UnknownScan(String),

    #[error("verdict conflict on {scan_id}: {reason}")]
    VerdictConflict { scan_id: String, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("port {port} unavailable: {reason}")]
    PortUnavailable { port: u16, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn unreadable(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Error::UnreadableFile {
            path: path.into(),
            reason: reason.to_string(),
        }
    }

    pub(crate) fn unwritable(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Error::UnwritablePath {
            path: path.into(),
            reason: reason.to_string(),
        }
    }
}
