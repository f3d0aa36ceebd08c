//! Two-stage robust transmission expansion planning.
//!
//! Lines are chosen before demand and generation capacity are known; the
//! network is then operated at least cost against the worst realization in
//! a cardinality-constrained uncertainty set. The solver alternates a
//! worst-case search (coordinate descent between a dispatch LP and a
//! linearized maximization over the set) with a master MILP holding one
//! operation block per realization found so far.

pub mod assess;
pub mod cli;
pub mod driver;
pub mod error;
pub mod grid;
pub mod master;
pub mod oracle;
pub mod recourse;
pub mod synthetic;
pub mod uncertainty;
pub mod worstcase;

pub use error::{Error, Result};
pub use grid::{CaseFormat, GridCase};
pub use recourse::{DispatchResult, ExpansionPlan};
pub use uncertainty::{Budgets, Realization};
