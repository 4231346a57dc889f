use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("supercritical Hardy coefficient: mu = {mu} is not below mu_bar = {mu_bar}")]
    SupercriticalHardy { mu: f64, mu_bar: f64 },

    #[error("profile is singular at the origin (mu = {mu} > 0)")]
    Singularity { mu: f64 },

    #[error("index out of range: {0}")]
    Index(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(
        "quadrature did not reach tolerance: estimate {estimate:e}, error bound {error:e} after {subdivisions} subdivisions"
    )]
    Accuracy {
        estimate: f64,
        error: f64,
        subdivisions: usize,
    },

    #[error("Newton iteration did not converge in {iterations} iterations (last gradient norm {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        /// Gradient norms along the iteration.
        trajectory: Vec<f64>,
    },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
