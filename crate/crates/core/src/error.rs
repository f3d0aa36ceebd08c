use std::path::PathBuf;

use thiserror::Error;

use crate::grid::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("invalid case ({} violation(s)):\n{}", .0.len(), format_violations(.0))]
    Validation(Vec<Violation>),

    #[error("{budget} budget violated: {selected} deviations selected, budget is {limit}")]
    Budget {
        budget: &'static str,
        selected: usize,
        limit: usize,
    },

    #[error("{0}")]
    Dimension(String),

    #[error("{what} count {count} exceeds cap {cap}")]
    CapExceeded {
        what: &'static str,
        count: u128,
        cap: u128,
    },

    #[error("dispatch infeasible; buses that cannot be balanced: {buses:?}")]
    InfeasibleDispatch { buses: Vec<u64> },

    #[error("big-M for candidate line {line} would be {value}, above the cap {cap}")]
    BigMOverflow { line: u64, value: f64, cap: f64 },

    #[error("master problem is infeasible")]
    MasterInfeasible,

    #[error("time limit of {0:?} reached")]
    TimeLimit(std::time::Duration),

    #[error(transparent)]
    Lp(#[from] linopt::LpError),

    #[error(transparent)]
    Mip(#[from] linopt::MipError),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| format!("  {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
