use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the gasket engines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("window cells do not form a connected subset of the gasket")]
    DisconnectedWindow,
    #[error("level {level} would produce about {vertices} vertices, above the cap of {cap}")]
    LevelTooLarge { level: u32, vertices: u64, cap: u64 },
    #[error("level mismatch: expected {expected}, found {found}")]
    LevelMismatch { expected: u32, found: u32 },
    #[error("point ({0}) is not a vertex of the graph")]
    VertexNotInGraph(String),
    #[error("vertex {0} lies on the window rim")]
    RimVertex(usize),
    #[error("point ({0}) lies outside the cell")]
    OutsideCell(String),
    #[error("depth {depth} exceeds the cap {cap}")]
    DepthExceeded { depth: usize, cap: usize },
    #[error("function has {found} values but the graph has {expected} vertices")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{states} states exceed the {what} cap of {cap}")]
    CapExceeded { what: &'static str, states: usize, cap: usize },
    #[error("eigen-decomposition failed")]
    EigenFailure,
    #[error("linear system is singular or not positive definite")]
    SingularSystem,
    #[error("domain is empty")]
    EmptyDomain,
    #[error("cutoff cell matches no case of the assembly table: {0}")]
    CutoffCase(String),
    #[error("degenerate instance: {0}")]
    Degenerate(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("too many flagged paths: {flagged} of {total}")]
    TooManyFlagged { flagged: u64, total: u64 },
    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
