use thiserror::Error;

/// Errors raised by the topology, loss and embedding layers.
#[derive(Debug, Error)]
pub enum TopoError {
    #[error("invalid simplex {vertices:?}: {reason}")]
    InvalidSimplex { vertices: Vec<usize>, reason: &'static str },

    #[error("ordering error: {0}")]
    Ordering(String),

    #[error("invalid point cloud: {0}")]
    InvalidPointCloud(String),

    #[error("points {0} and {1} coincide")]
    DuplicatePoints(usize, usize),

    #[error("simplex budget exceeded: {count} simplices requested, budget is {budget}")]
    BudgetExceeded { count: u128, budget: usize },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("no 1-dimensional class of rank {0} in the diagram")]
    NoCycle(usize),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("retraction failed: {0}")]
    Retraction(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = TopoError> = std::result::Result<T, E>;
