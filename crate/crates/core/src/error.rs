use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KronError {
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("graph size {size} exceeds the supported maximum of {cap} vertices")]
    SizeOverflow { size: u128, cap: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("degenerate graph: grand mean {mean} leaves no valid base probability")]
    DegenerateGraph { mean: f64 },

    #[error("SVD did not converge after {iterations} iterations (residual {residual:e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("{}:{line}: malformed line: {message}", path.display())]
    MalformedLine {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("edge ({src}, {dst}) crosses graphs {src_graph} and {dst_graph}")]
    CrossGraphEdge {
        src: usize,
        dst: usize,
        src_graph: usize,
        dst_graph: usize,
    },

    #[error("missing dataset file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("invalid adjacency data: {0}")]
    InvalidFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = KronError> = std::result::Result<T, E>;
