use thiserror::Error;

/// Errors produced by the numerical routines in this crate.
///
/// Scalar diagnostics are stored as `f64` regardless of the working
/// precision so the error type stays non-generic.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{context}: dimension mismatch, expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("matrix is not symmetric (max asymmetry {max_asymmetry:.3e} exceeds tolerance)")]
    NotSymmetric { max_asymmetry: f64 },

    #[error("vector length {len} is not a triangular number")]
    NotTriangular { len: usize },

    #[error("{context}: matrix is not positive definite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite {
        context: &'static str,
        min_eigenvalue: f64,
    },

    #[error("policy not mean-square stabilizing (spectral radius {spectral_radius:.6})")]
    NotStabilizing { spectral_radius: f64 },

    #[error("{context}: system is ill-conditioned (condition {condition:.3e})")]
    IllConditioned {
        context: &'static str,
        condition: f64,
    },

    #[error("IV update singular (denominator {denominator:.3e})")]
    SingularUpdate { denominator: f64 },

    #[error("policy improvement undefined: {0}")]
    ImprovementUndefined(String),

    #[error("iteration limit reached after {iterations} iterations")]
    MaxIterations { iterations: usize },

    #[error("{context}: non-finite value encountered")]
    NonFinite { context: &'static str },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("failed to parse system configuration: {0}")]
    ConfigParse(#[from] toml::de::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
