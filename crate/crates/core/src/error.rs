use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("structural error in {context}: {message}")]
    Structural { context: String, message: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate regressor: {0}")]
    DegenerateRegressor(String),

    #[error("matrix conditioning: {0}")]
    Conditioning(String),

    #[error("glasso did not converge after {sweeps} sweeps (max change {residual:.3e})")]
    NonConvergence { sweeps: usize, residual: f64 },

    #[error("dictionary `{0}` has no terms in the embedding store")]
    Coverage(String),

    #[error("experiment spec: {0}")]
    Spec(String),

    #[error("response does not contain a parseable JSON object: {0}")]
    ResponseParse(String),

    #[error("schema violation, missing questions: {}", .0.join(", "))]
    SchemaViolation(Vec<String>),

    #[error("transport error after {retries} retries: {message}")]
    Transport { retries: u32, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl std::fmt::Display, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_string(),
            line,
            message: message.into(),
        }
    }
}
