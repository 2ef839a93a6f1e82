use thiserror::Error;

/// Errors raised by the numerical layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("ensemble mismatch: expected {expected}, got {found}")]
    EnsembleMismatch {
        expected: &'static str,
        found: &'static str,
    },

    /// The moment matrix could not be factorized to the requested accuracy,
    /// even after the allowed number of precision escalations.
    #[error("ill-conditioned moment matrix: pivot {index} failed at {digits} digits")]
    IllConditioned { index: usize, digits: u32 },

    #[error("no convergence: {0}")]
    NonConvergence(String),

    /// A finite-difference step was too coarse for the requested tolerance.
    #[error("finite-difference step too large: {0}")]
    StepTooLarge(String),

    /// A square-root discriminant came out negative at an evaluation point.
    #[error("invalid evaluation point: {0}")]
    InvalidPoint(String),

    #[error("grid node ({a}, {b}): {source}")]
    AtNode {
        a: f64,
        b: f64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
