use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected} slots, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("template {template} violates the request constraints")]
    InfeasibleTemplate { template: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("negative weight {0}")]
    NegativeWeight(f64),

    #[error("page length {page_length} exceeds the exhaustive search cap of {cap}")]
    OracleCapExceeded { page_length: usize, cap: usize },

    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("target monetization rate {target} is unreachable (achievable maximum {achievable})")]
    Unreachable { target: f64, achievable: f64 },

    #[error("advantage undefined: baseline {metric} is {value}")]
    ZeroBaseline { metric: String, value: f64 },

    #[error("schema error at line {line}: {reason}")]
    Schema { line: usize, reason: String },

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code for the CLI: 2 for configuration problems, 3 for data problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Unreachable { .. } => 2,
            _ => 3,
        }
    }
}
