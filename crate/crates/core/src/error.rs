use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported domain: {0}")]
    UnsupportedDomain(String),

    #[error("level mismatch: expected level {expected}, got level {actual}")]
    LevelMismatch { expected: usize, actual: usize },

    #[error("levels {coarse} and {fine} are not consecutive levels of one hierarchy")]
    NonConsecutiveLevels { coarse: usize, fine: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("local polynomial at node {node} is identically zero")]
    DegeneratePolynomial { node: usize },

    #[error("polynomial has a zero leading coefficient")]
    ZeroLeadingCoefficient,

    #[error("eigenvalue iteration did not converge for polynomial with coefficients {coeffs:?}")]
    EigenNonConvergence { coeffs: Vec<f64> },

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("no solutions found on level {level}; {hint}")]
    NoSolutions { level: usize, hint: String },

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
