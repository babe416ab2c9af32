use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("LP solver failed ({reason}) on matrix {matrix:?}")]
    Solver { reason: String, matrix: Vec<Vec<f64>> },

    #[error("value iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("timescale separation violated within one timescale: exponents {0} and {1} differ")]
    MismatchedExponents(f64, f64),

    #[error("invariant violated at stage {stage}: {message}")]
    Invariant { stage: u64, message: String },

    #[error("game file: {0}")]
    Format(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
