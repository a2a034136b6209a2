use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("radius {radius} outside the valid range [{min}, {max}]")]
    OutOfRange { radius: f64, min: f64, max: f64 },

    #[error("invalid source: {0}")]
    InvalidSource(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("quadrature did not converge on [{a}, {b}]: estimated error {error:e} after {intervals} intervals")]
    Quadrature {
        a: f64,
        b: f64,
        error: f64,
        intervals: usize,
    },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("inconsistent input: {0}")]
    Inconsistent(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
