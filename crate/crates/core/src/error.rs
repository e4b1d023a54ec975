use std::path::PathBuf;

use crate::grid::Cell;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("map parse error at line {line}: {message}")]
    MapParse { line: usize, message: String },

    #[error("cell ({}, {}) is outside the grid", .0.i, .0.j)]
    OutOfBounds(Cell),

    #[error("circle radius must be at least 1, got {0}")]
    InvalidRadius(i32),

    #[error("map generation failed: {0}")]
    MapGen(String),

    #[error("sections are not adjacent: first ends at ({}, {}), second starts at ({}, {})", .0.i, .0.j, .1.i, .1.j)]
    NonAdjacent(Cell, Cell),

    #[error("degenerate section: start and end are both ({}, {})", .0.i, .0.j)]
    DegenerateSection(Cell),

    #[error("intersection point requested for collinear sections")]
    CollinearSections,

    #[error("section index {index} out of range for path with {len} sections")]
    SectionIndex { index: usize, len: usize },

    #[error("point ({0}, {1}) does not lie on section {2}")]
    OffSection(f64, f64, usize),

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("invalid solution: {0}")]
    Solution(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Resolve(#[from] crate::resolution::ResolveError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
