//! Dense linear algebra: row-major matrices, a one-sided Jacobi thin SVD,
//! power-iteration spectral norms, Cholesky solves and CSV exchange.

mod cholesky;
mod csv;
mod matrix;
mod power;
mod svd;

pub use cholesky::{solve_spd, Cholesky};
pub use csv::{read_csv, read_csv_file, write_csv, write_csv_file};
pub use matrix::{axpy, dot, matmul, norm2, DenseMatrix};
pub(crate) use matrix::gemm;
pub use power::spectral_norm;
pub use svd::{svd_thin, SvdFactorization, DEFAULT_MAX_SWEEPS, DEFAULT_SVD_TOL};

/// Relative numerical-rank cut used by every pseudo-inverse style filter.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, thiserror::Error)]
pub enum LinalgError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("empty matrix")]
    Empty,
    #[error("Jacobi SVD did not converge in {sweeps} sweeps (off-diagonal measure {off_norm:e})")]
    SvdNoConvergence { sweeps: usize, off_norm: f64 },
    #[error("matrix is not symmetric positive definite (pivot {pivot} = {value:e})")]
    NotSpd { pivot: usize, value: f64 },
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
