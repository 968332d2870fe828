//! Dense primal-dual interior-point solver for small semidefinite programs.
//!
//! Problems are stated in equality form over a product of real PSD blocks, see
//! [`ConicProblem`]. Complex Hermitian programs are expected to be realified by
//! the caller.

mod presolve;
mod problem;
mod solver;
mod text;

pub use presolve::{reduce_rows, RowReduction};
pub use problem::{smat, svec, svec_len, svec_pos, ConicProblem, SparseRow};
pub use solver::{solve_conic, ConicSolution, SolverSettings, Status};
pub use text::{read_problem, write_problem};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConicError {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
