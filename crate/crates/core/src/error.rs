use crate::Characteristic;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("duplicate utterance id {0:?}")]
    Conflict(String),

    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("cannot resolve majority: {0}")]
    Resolution(String),

    #[error("stratification error: {0}")]
    Stratification(String),

    #[error("degenerate training data: {0}")]
    DegenerateTraining(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("training diverged at epoch {epoch}: {message}")]
    Training { epoch: usize, message: String },

    #[error("no model loaded for {0}")]
    MissingModel(Characteristic),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid model container: {0}")]
    Container(String),

    #[error("fingerprint mismatch for {what}: expected {expected}, found {actual}")]
    Fingerprint { what: String, expected: String, actual: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Conflict(_) => "conflict",
            Error::Schema { .. } => "schema",
            Error::Resolution(_) => "resolution",
            Error::Stratification(_) => "stratification",
            Error::DegenerateTraining(_) => "degenerate_training",
            Error::Calibration(_) => "calibration",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::EmptyInput(_) => "empty_input",
            Error::Format { .. } => "format",
            Error::Training { .. } => "training",
            Error::MissingModel(_) => "missing_model",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Container(_) => "container",
            Error::Fingerprint { .. } => "fingerprint",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
