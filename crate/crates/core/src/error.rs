use thiserror::Error;

/// Errors raised by the queue engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("traffic intensity r = {r} violates ergodicity (need 0 <= r < 1)")]
    ErgodicityViolation { r: f64 },

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("point {re}{im:+}i is within the guard distance of the pole at 1/r")]
    PoleEvaluation { re: f64, im: f64 },

    #[error("{what} did not converge after {iterations} refinements (best estimate {best_estimate:e})")]
    ConvergenceFailure { what: &'static str, iterations: usize, best_estimate: f64 },

    #[error("no index qualifies for comparison above p_lim = {p_lim:e}")]
    EmptyComparison { p_lim: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::DomainError(msg.into())
    }
}
