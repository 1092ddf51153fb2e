use thiserror::Error;

use crate::gate::Basis;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid gate parameters: {0}")]
    InvalidGate(String),

    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),

    #[error("invalid bipartition mask: {0}")]
    InvalidMask(String),

    #[error("basis mismatch: state is {state:?} but matrix is {matrix:?}")]
    BasisMismatch { state: Basis, matrix: Basis },

    /// Dense purity vectors are capped by available memory. Larger systems
    /// must go through the MPS engine (`evolve --engine mps`).
    #[error("dense vector for n={n} exceeds the cap n<={cap}; use the MPS engine")]
    DenseCapExceeded { n: usize, cap: usize },

    #[error("size budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("geometry parse error at line {line}: {msg}")]
    Geometry { line: usize, msg: String },

    #[error("monte-carlo validation: {0}")]
    MonteCarlo(String),

    #[error("window too short: need at least {need} usable points, got {got}")]
    WindowTooShort { need: usize, got: usize },

    #[error("defective eigenvalue cluster: {0}")]
    Defective(String),

    #[error("{0}")]
    Numerics(String),

    #[error("linear algebra backend: {0}")]
    Backend(String),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Backend(e.to_string())
    }
}
