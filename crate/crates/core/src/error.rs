use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate scene: sources {0} and {1} coincide")]
    DegenerateScene(usize, usize),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("overlap matrix is ill-conditioned (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("information matrix is singular (condition number {0:.3e})")]
    SingularInformation(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("quadrature did not reach tolerance {tol:.1e} (last error estimate {estimate:.3e})")]
    QuadratureFailure { tol: f64, estimate: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
