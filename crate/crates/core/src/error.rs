use thiserror::Error;

/// Errors surfaced by the solvers and estimators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate weights: total weight is zero")]
    DegenerateWeights,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("prune failed: no accepted pivot after {trials} trials (promise likely violated)")]
    PruneFailed { trials: usize },

    #[error("width violated at iteration {iteration}: score {score} exceeds rho {rho}")]
    WidthViolated {
        iteration: usize,
        score: f64,
        rho: f64,
    },

    #[error("promise violated: {0}")]
    PromiseViolated(String),

    #[error("instance generation failed: {0}")]
    Generation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
