use thiserror::Error;

use crate::conic::SolveStatus;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("not Hermitian: max |M - M^dagger| = {deviation:e} exceeds {tol:e}")]
    NotHermitian { deviation: f64, tol: f64 },

    #[error("not positive semidefinite: min eigenvalue {min_eigenvalue:e} below -{tol:e}")]
    NotPsd { min_eigenvalue: f64, tol: f64 },

    #[error("trace is {trace}, expected 1 within {tol:e}")]
    BadTrace { trace: f64, tol: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("conic solve of {program} ended with status {status:?}")]
    Solver { program: String, status: SolveStatus },

    #[error("malformed state document: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
