use thiserror::Error;

/// Errors surfaced by graph construction, covariance algebra, and estimation.
#[derive(Debug, Error)]
pub enum PolcmError {
    #[error("invalid node id {0} for a graph with {1} nodes")]
    InvalidNode(usize, usize),

    #[error("graph is not acyclic: {0}")]
    Cyclic(String),

    #[error("malformed graph: {0}")]
    MalformedGraph(String),

    #[error("input sets must be disjoint: {0}")]
    OverlappingSets(String),

    #[error("unsupported block shape: {0}")]
    UnsupportedShape(String),

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("model iterate is invalid: {0}")]
    InvalidIterate(String),

    #[error("estimation failed: {0}")]
    EstimationFailed(String),

    #[error("degenerate column: {0}")]
    DegenerateColumn(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
