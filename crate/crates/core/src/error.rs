use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field grids differ")]
    GridMismatch,
    #[error("expected {expected} samples, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("non-finite value at sample {index}")]
    NonFinite { index: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("incompatible Neumann data: relative defect {defect:.3e} exceeds {limit:.3e}")]
    Incompatible { defect: f64, limit: f64 },
    #[error(
        "solver did not converge in {iterations} iterations (relative residual {residual:.3e})"
    )]
    NotConverged {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("trajectories crossed: Lagrangian mesh Jacobian changed sign")]
    TrajectoryCrossing,
    #[error("integration step produced non-finite state at step {step}")]
    StepRejected { step: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
