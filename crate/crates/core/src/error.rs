use thiserror::Error;

/// Errors raised while loading models or running the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("stochasticity error: kernel row at state {state}, action {action} sums to {sum} (min entry {min_entry})")]
    Stochasticity {
        state: usize,
        action: usize,
        sum: f64,
        min_entry: f64,
    },

    #[error("metric error: {0}")]
    Metric(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate model: {0}")]
    Degenerate(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("potential is not 1-Lipschitz at states ({i}, {j}): |g_i - g_j| = {gap} > d = {dist}")]
    NotLipschitz {
        i: usize,
        j: usize,
        gap: f64,
        dist: f64,
    },

    #[error("inner minimization did not converge at state {state:?}: projected gradient norm {grad_norm:e}")]
    NoConvergence { state: Option<usize>, grad_norm: f64 },

    #[error("no minorization: total mass {mass:e} of the minorizing measure is not positive")]
    NoMinorization { mass: f64 },

    #[error("invalid measure: {0}")]
    Measure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
