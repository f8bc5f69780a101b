use std::path::PathBuf;

use thiserror::Error;

use crate::features::FeatureKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {source_name} at line {line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("mesh has no faces")]
    EmptyMesh,

    #[error("face {face} references vertex {index}, but the mesh has {count} vertices")]
    InvalidFace { face: usize, index: u32, count: usize },

    #[error("mesh bounding box has zero extent")]
    DegenerateExtent,

    #[error("voxel level {0} exceeds the maximum of {max}", max = crate::voxelize::MAX_LEVEL)]
    ResolutionTooHigh(u32),

    #[error("mesh vertex {vertex} at {position:?} lies outside the unit cube")]
    MeshOutOfBounds { vertex: usize, position: [f64; 3] },

    #[error("mesh is not consistent (watertight); required by {}", kind_list(.0))]
    ConsistencyRequired(Vec<FeatureKind>),

    #[error("invalid recipe: {0}")]
    Recipe(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("{failed} of {total} objects failed feature extraction (limit is 10%)")]
    TooManyFailures { failed: usize, total: usize },

    #[error("unsupported file version or format: {0}")]
    VersionMismatch(String),

    #[error("degenerate training data: {0}")]
    DegenerateData(String),

    #[error("column mismatch: model expects {expected} columns, got {actual}")]
    ColumnMismatch { expected: usize, actual: usize },

    #[error("column mismatch: {0}")]
    ColumnNames(String),

    #[error("{path}: {source}")]
    FileIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(source_name: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::FileIo {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the input data rather than by the program.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}

fn kind_list(kinds: &[FeatureKind]) -> String {
    kinds.iter().map(|k| k.name()).collect::<Vec<_>>().join(", ")
}
