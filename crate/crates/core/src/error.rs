use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed manifest: {message}")]
    Manifest { path: PathBuf, message: String },

    #[error("episode {episode}: task_id out of range ({task_id} >= task_count {task_count})")]
    TaskIdOutOfRange {
        episode: usize,
        task_id: usize,
        task_count: usize,
    },

    #[error("episode {episode}: length must be >= 1")]
    EmptyEpisode { episode: usize },

    #[error("episode {episode}: {frames} frame_refs for length {length}")]
    FrameCountMismatch {
        episode: usize,
        frames: usize,
        length: usize,
    },

    #[error("bad magic: expected \"EDMF\", found {found:?}")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: u64, found: u64 },

    #[error("row-count mismatch: file has {found} rows, manifest expects {expected}")]
    RowCountMismatch { expected: usize, found: usize },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("row {row}: norm {norm} violates the unit-norm flag")]
    NotNormalized { row: usize, norm: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate bandwidth: all pairwise distances are zero")]
    DegenerateBandwidth,

    #[error("task {0} has no samples")]
    EmptyTask(usize),

    #[error("{rows} rows exceeds the dense-matrix limit of {limit}; use the blocked estimators")]
    TooLarge { rows: usize, limit: usize },

    #[error("memory budget of {budget} bytes is too small (need at least {needed})")]
    MemoryBudget { budget: usize, needed: usize },

    #[error("constant input: {0}")]
    ConstantInput(&'static str),

    #[error("image {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("fixture: {0}")]
    Fixture(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
