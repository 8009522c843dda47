use thiserror::Error;

/// Errors produced by the analysis and simulation pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("power iteration failed to converge after {iterations} iterations (last estimates {last:.6e}, {prev:.6e})")]
    NonConvergence {
        iterations: usize,
        last: f64,
        prev: f64,
    },

    #[error("matrix is numerically singular (pivot {pivot:.3e} below threshold {threshold:.3e})")]
    Singular { pivot: f64, threshold: f64 },

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("per-column realization count {count} exceeds the enumeration limit {limit}; use Monte Carlo mode")]
    EnumerationTooLarge { count: u64, limit: u64 },

    #[error("all agents have zero mean step-size")]
    AllAgentsOff,

    #[error("regressor covariance for agent {agent} is not positive definite (min eigenvalue {min_eig:.3e})")]
    NotPositiveDefinite { agent: usize, min_eig: f64 },

    #[error("Perron eigenvector has a non-positive entry ({value:.3e} at index {index}); the moment matrix is likely not primitive")]
    NonPositivePerron { index: usize, value: f64 },

    #[error("problem dimension {dim} exceeds the dense-solve guard {guard}; only the low-rank path is available")]
    DimensionGuard { dim: usize, guard: usize },

    #[error("unstable recursion: spectral radius {rho:.6} >= 1")]
    Unstable { rho: f64 },

    #[error("combination moments are not primitive: {0}")]
    NotPrimitive(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("simulation run {run} diverged at iteration {iteration}")]
    Diverged { run: usize, iteration: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
