use thiserror::Error;

/// Errors produced while validating models or running one of the engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The drift probabilities cannot form a distribution (e.g. `K·p > 1`).
    #[error("infeasible: {0}")]
    InfeasibleDrift(String),

    #[error("negative probability: {name} = {value}")]
    NegativeProbability { name: &'static str, value: f64 },

    #[error("bad parameter: {0}")]
    BadParameter(String),

    #[error("truncation too small: i_max = {i_max}, need at least {required}")]
    TruncationTooSmall { i_max: usize, required: usize },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// Recursion and timestamp views of the age disagreed. Always a bug.
    #[error("view mismatch at slot {t}: recursion gives {recursion}, timestamps give {timestamp}")]
    ViewMismatch {
        t: u64,
        recursion: u64,
        timestamp: u64,
    },

    #[error("bad schedule: {0}")]
    BadSchedule(String),
}

pub type Result<T> = std::result::Result<T, Error>;
