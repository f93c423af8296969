use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("negative weight {0}")]
    NegativeWeight(f64),

    #[error("measure has zero mass")]
    ZeroMass,

    #[error("{0}")]
    InvalidLambda(String),

    #[error("{0}")]
    InvalidArgument(String),

    #[error("{what}: {needed} exceeds budget {budget}")]
    BudgetExceeded {
        what: &'static str,
        needed: u128,
        budget: u128,
    },

    #[error("root modulus within {tol:e} of radius {rho}; perturb the radius")]
    RootOnCircle { rho: f64, tol: f64 },

    #[error("numerical tie: {0}")]
    Tie(String),

    #[error("root certification failed: {0}")]
    Certification(String),

    #[error("invalid system spec: {0}")]
    Spec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::BudgetExceeded { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
