use alloc::string::String;
use alloc::vec::Vec;

/// Failure modes of the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("parameter `{name}` {reason}")]
    Param { name: &'static str, reason: &'static str },

    #[error("domain error: {0}")]
    Domain(&'static str),

    #[error("invalid input: {0}")]
    Input(String),

    #[error(
        "quadrature did not converge: estimate {estimate:e}, error {error:e}, \
         {intervals} intervals, {evaluations} evaluations"
    )]
    Quadrature { estimate: f64, error: f64, intervals: usize, evaluations: usize },

    #[error("{kernel} fit failed: best residual {best_residual:e} above tolerance {tol:e}")]
    Fit { kernel: String, best_residual: f64, tol: f64, curve: Vec<(usize, f64)> },

    #[error("step size underflow at t = {t}: h = {h:e} after {steps} steps")]
    Stiffness { t: f64, h: f64, steps: usize },

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: &'static str },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: &'static str) -> Self {
        Error::Param { name, reason }
    }
}
