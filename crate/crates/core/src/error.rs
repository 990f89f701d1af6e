use alloc::string::String;
use alloc::vec::Vec;

use crate::linalg::CVec;

/// Errors raised by the solver library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Invalid scenario, cluster or solver configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// An argument outside the domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),
    /// The power-dual bisection ran out of iterations. Carries the best
    /// feasible iterate found so far.
    #[error("bisection did not converge after {iterations} iterations (power {power}, budget {budget})")]
    Convergence {
        iterations: usize,
        power: f64,
        budget: f64,
        best_nu: f64,
        best_beams: Vec<CVec>,
    },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
