//! Deterministic linear optimization: a bounded-variable revised simplex
//! that reports row duals and reduced costs, and a branch-and-bound solver
//! for programs with binary variables.

mod error;
mod lu;
mod mip;
mod model;
pub mod mps;
mod simplex;

pub use error::{LpError, MipError};
pub use mip::{solve_mip, MipOptions, MipSolution, MipStatus, NodeOrder};
pub use model::{LinearProgram, MixedIntegerProgram, Row, RowId, RowKind, VarId};
pub use simplex::{solve_lp, solve_lp_warm, solve_lp_with, Basis, LpSolution, LpStatus, VarStatus};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Scaled primal feasibility and complementary-slackness tolerance.
    pub feas_tol: f64,
    /// Allowed `|primal - dual| / (1 + |objective|)` at an optimum.
    pub duality_gap_tol: f64,
    /// Relative gap at which branch-and-bound stops.
    pub mip_gap_tol: f64,
    /// Simplex iteration cap; 0 picks a size-dependent default.
    pub max_iterations: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feas_tol: 1e-9,
            duality_gap_tol: 1e-9,
            mip_gap_tol: 1e-8,
            max_iterations: 0,
        }
    }
}
