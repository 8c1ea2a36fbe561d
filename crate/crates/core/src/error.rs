use thiserror::Error;

/// Errors raised by the factorization routines and their file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("jacobi svd did not converge within {sweeps} sweeps")]
    ConvergenceFailure { sweeps: usize },

    #[error("constraint spans the whole {dim}-dimensional space")]
    EmptyComplement { dim: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("block ({row}, {col}) has an infinite summation fiber")]
    InfiniteFiber { row: i64, col: i64 },

    #[error("operator is not block triangular for split at {split}")]
    NotTriangular { split: i64 },

    #[error(
        "semi-Fredholm obstruction at step {step}: constrained minimum {value:.3e} is not below {eps:.3e}"
    )]
    SemiFredholmObstruction { step: usize, value: f64, eps: f64 },

    #[error("space of dimension {dim} is too small for {needed} dimensions")]
    SpaceTooSmall { dim: usize, needed: usize },

    #[error("degenerate reduction: upper-right block has rank {rank} on a {dim}-dimensional top part")]
    DegenerateReduction { rank: usize, dim: usize },

    #[error("compact split needs at least 2 pieces per side, got {pieces}")]
    SplitTooShallow { pieces: usize },

    #[error("spectrum does not decay: tail mean {tail:.3e} exceeds {limit:.3e}")]
    NotEssentiallySingular { tail: f64, limit: f64 },

    #[error("range inclusion failed: residual {residual:.3e} exceeds {tol:.3e}")]
    RangeInclusionFailed { residual: f64, tol: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("operator is injective and padding is disabled")]
    KernelEmpty,

    #[error("padding of {needed} exceeds the budget of {budget}")]
    BudgetExceeded { needed: usize, budget: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid family descriptor: {0}")]
    InvalidDescriptor(String),

    #[error("bundle: {0}")]
    Bundle(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
