use thiserror::Error;

pub type Result<T> = std::result::Result<T, GgmError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GgmError {
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("invalid index set: {0}")]
    InvalidIndexSet(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("graph is not chordal")]
    NotChordal,

    #[error("{what} too large: {got} exceeds limit {limit}")]
    TooLarge {
        what: &'static str,
        limit: usize,
        got: usize,
    },

    #[error("partial matrix has no positive definite completion: {0}")]
    NotCompletable(String),

    #[error("maximum likelihood estimate does not exist: {0}")]
    NonExistent(String),

    #[error("iteration cap of {0} reached before convergence")]
    IterationCap(usize),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("data set has no rows")]
    EmptyData,

    #[error("insufficient samples: n = {n} with p = {p} leaves no degrees of freedom")]
    InsufficientSamples { n: usize, p: usize },

    #[error("fit did not converge")]
    NotConverged,

    #[error("parse error: {0}")]
    Parse(String),
}
