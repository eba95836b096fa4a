use thiserror::Error;

/// Errors raised by model construction, solvers and analyses.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{what} = {value} is outside {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("singular point: {0}")]
    Singular(String),

    #[error("phase analysis requires zero field")]
    NonzeroField,

    #[error("degenerate coupling: j12 = 0")]
    DegenerateCoupling,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("lumped state space has {states} states, budget is {budget}")]
    BudgetExceeded { states: usize, budget: usize },

    #[error("step-size control failed at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },

    #[error("bisection failed: {0}")]
    Bisection(String),

    #[error("solver failure: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, Error>;
