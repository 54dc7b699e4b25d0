use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("block structures do not match")]
    StructureMismatch,
    #[error("affine constraints are inconsistent (relative residual {residual:.3e})")]
    InfeasibleAffine { residual: f64 },
    #[error("subspace dimension {dim} exceeds the capacity {cap}")]
    Capacity { dim: usize, cap: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{0}")]
    Domain(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
