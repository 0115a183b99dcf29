use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown Φ family `{0}`")]
    UnknownPhi(String),

    #[error("Φ family `{family}` needs alpha in (1, 2], got {alpha:?}")]
    AlphaOutOfRange { family: String, alpha: Option<f64> },

    #[error("Φ family `{0}` takes no alpha parameter")]
    UnexpectedAlpha(String),

    #[error("value {value} at outcome {outcome} lies outside the domain of Φ `{phi}`")]
    OutsideDomain {
        phi: String,
        value: f64,
        outcome: String,
    },

    #[error("degenerate evaluation points (zero denominator): {points:?}")]
    Degenerate { points: Vec<f64> },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("invalid random function: {0}")]
    InvalidFunction(String),

    #[error("precondition failed: {what} (residual {residual:e})")]
    Precondition { what: String, residual: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("search found no admissible point")]
    NoAdmissiblePoint,

    #[error("malformed JSON at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
