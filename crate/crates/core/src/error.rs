use thiserror::Error;

use crate::spectral::WaveIndex;

pub type Result<T> = std::result::Result<T, HvbkError>;

#[derive(Debug, Error)]
pub enum HvbkError {
    #[error("grid of {m} points per axis cannot resolve truncation N={n} (need at least {required})")]
    Resolution { n: usize, m: usize, required: usize },

    #[error("fields have mismatched truncation: {left} vs {right}")]
    TruncationMismatch { left: usize, right: usize },

    #[error("consistency violation: {0}")]
    Consistency(String),

    #[error("vorticity magnitude {value:.6e} at grid node {node:?} is not above floor {floor:.6e}")]
    Singularity { node: [usize; 3], value: f64, floor: f64 },

    #[error("exponential weight overflows at wave index {k:?} (sigma*(1+|k|^2)^(1/2) = {exponent:.3})")]
    Range { k: WaveIndex, exponent: f64 },

    #[error("reciprocal-magnitude series diverges: beta = 2*C0*sigma0/m_f = {beta:.6} >= 1")]
    DivergentSeries { beta: f64 },

    #[error("factorial of {0} exceeds exact 64-bit range")]
    FactorialOverflow(u64),

    #[error("spectral decay fit failed: {0}")]
    Fit(String),

    #[error("brute-force oracle refused N={n} (limit {limit})")]
    CostGuard { n: usize, limit: usize },

    #[error("estimate violated: right-hand side is zero while left-hand side is {lhs:.6e}")]
    EstimateViolation { lhs: f64 },

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid configuration: {}", violations.join("; "))]
    Config { violations: Vec<String> },

    #[error("snapshot format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl HvbkError {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            HvbkError::Precondition(_) | HvbkError::Config { .. } | HvbkError::Input(_) => 2,
            HvbkError::Singularity { .. } => 3,
            HvbkError::Range { .. }
            | HvbkError::DivergentSeries { .. }
            | HvbkError::FactorialOverflow(_)
            | HvbkError::Fit(_)
            | HvbkError::Consistency(_)
            | HvbkError::EstimateViolation { .. }
            | HvbkError::Sampling(_) => 4,
            _ => 1,
        }
    }
}
