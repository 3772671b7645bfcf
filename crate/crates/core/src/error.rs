use thiserror::Error;

/// Errors raised while building, validating or analyzing chains and MDPs.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("row {row} ({state}) sums to {sum}, expected 1")]
    RowSum { row: usize, state: String, sum: f64 },

    #[error("entry ({row}, {col}) = {value} is negative")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("entry ({row}, {col}) = {value} is not a probability")]
    EntryOutOfRange { row: usize, col: usize, value: f64 },

    #[error("halt state {state} is not absorbing (self-transition probability {self_prob})")]
    HaltNotAbsorbing { state: String, self_prob: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("eigen-solver did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("transient system is singular: the halt state is unreachable from some state (lambda2 = 1)")]
    Singular,

    #[error("undefined: {0}")]
    Undefined(&'static str),

    #[error("chain has no value matrix")]
    MissingValueMatrix,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("policy does not cover {}", format_pairs(.missing))]
    IncompletePolicy { missing: Vec<(String, String)> },

    #[error("policy assigns an action to the halt state {0}")]
    PolicyOnHalt(String),

    #[error("{censored} of {trials} trajectories hit the step cap")]
    Censoring { censored: usize, trials: usize },
}

fn format_pairs(pairs: &[(String, String)]) -> String {
    pairs
        .iter()
        .map(|(s, g)| format!("({s}, {g})"))
        .collect::<Vec<_>>()
        .join(", ")
}

pub type Result<T> = std::result::Result<T, Error>;
