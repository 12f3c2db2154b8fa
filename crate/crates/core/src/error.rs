use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("schema error: kind `{kind}` is not value-bearing but carries a value")]
    Schema { kind: String },

    #[error("version mismatch for {what}: expected {expected}, found {found}")]
    Version {
        what: String,
        expected: String,
        found: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("lasso did not converge after {sweeps} sweeps (max change {max_change:e})")]
    LassoConvergence {
        sweeps: usize,
        max_change: f64,
        coefficients: Vec<f64>,
        intercept: f64,
    },

    #[error("SMO did not converge after {iterations} iterations (KKT violation {violation:e})")]
    SvmConvergence { iterations: usize, violation: f64 },

    #[error("corpus generation failed: {0}")]
    Generation(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("state error on entry `{entry}`: {message}")]
    State { entry: String, message: String },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn version(what: &str, expected: impl ToString, found: impl ToString) -> Self {
        Error::Version {
            what: what.to_string(),
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// Config, version and usage problems map to 2; everything else to 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Version { .. } => 2,
            _ => 1,
        }
    }
}
