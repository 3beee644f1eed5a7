//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum CoreError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The metric g + φ_ij̄ lost positivity (or c ≤ 0) at a concrete node.
    #[error(
        "degenerate state at level {level}, node {node}: min eigenvalue {min_eig:.3e}, c {c:.3e}"
    )]
    DegenerateState {
        level: usize,
        node: usize,
        min_eig: f64,
        c: f64,
    },

    #[error("Newton did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error(
        "Krylov stagnation at Newton iteration {newton_iter}: relative residual {achieved:.3e} \
         after {krylov_iters} iterations (target {required:.3e})"
    )]
    LinearSolveFailure {
        newton_iter: usize,
        krylov_iters: usize,
        achieved: f64,
        required: f64,
    },

    #[error("infeasible input: {0}")]
    InfeasibleInput(String),
}
