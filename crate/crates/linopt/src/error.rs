use thiserror::Error;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("malformed program: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("numerical failure after {iterations} iterations (worst scaled residual {residual:.3e})")]
    NumericalFailure { iterations: usize, residual: f64 },
    #[error("simplex iteration limit reached after {iterations} iterations")]
    IterationLimit { iterations: usize },
}

#[derive(Debug, Error)]
pub enum MipError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("{limit} limit reached after {nodes} nodes (incumbent {incumbent:?}, bound {bound})")]
    LimitExceeded {
        limit: &'static str,
        nodes: usize,
        incumbent: Option<f64>,
        bound: f64,
        best: Option<Box<crate::MipSolution>>,
    },
}
