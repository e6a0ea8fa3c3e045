use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("polynomial has odd-power coefficients above tolerance (max relative {0:e})")]
    OddCoefficientsPresent(f64),
    #[error("all polynomial coefficients vanish")]
    ZeroPolynomial,
    #[error("critical load is infinite for this configuration")]
    InfiniteLoad,
    #[error("damping is degenerate: closed-form denominator vanishes")]
    DegenerateDamping,
    #[error("configuration is already unstable at zero load")]
    UnstableAtZeroLoad,
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("triple-root conditions collapsed to a root of order {0}")]
    ConvergedToLowerOrder(usize),
    #[error("value is not a root (relative residual {0:e})")]
    NotARoot(f64),
    #[error("operation requires {0}")]
    Unsupported(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
