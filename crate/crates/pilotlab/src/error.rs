use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not Hermitian (max asymmetry {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e}, tolerance {tolerance:.3e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64, tolerance: f64 },

    #[error("Cholesky factorization failed: {0}")]
    FactorizationFailed(String),

    #[error("numerical breakdown: {0}")]
    Numerical(String),

    #[error("degenerate scenario: {0}")]
    DegenerateScenario(String),

    #[error("degenerate combiner: {0}")]
    DegenerateCombiner(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line frontend: 2 for configuration
    /// and parameter problems, 3 for numerical failures, 4 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_)
            | Error::DimensionMismatch { .. }
            | Error::NotHermitian { .. }
            | Error::DegenerateScenario(_)
            | Error::DegenerateCombiner(_)
            | Error::Config(_)
            | Error::Json(_) => 2,
            Error::NotPositiveSemidefinite { .. }
            | Error::FactorizationFailed(_)
            | Error::Numerical(_) => 3,
            Error::Io(_) => 4,
        }
    }
}
