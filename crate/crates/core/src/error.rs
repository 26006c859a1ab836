use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty rank table")]
    EmptyRankTable,
    #[error("rank of NaN is undefined")]
    NanScore,
    #[error("probabilities sum to {sum}, expected 1 (multiclass)")]
    NotNormalized { sum: f64 },
    #[error("invalid probability {value} at index {index}")]
    InvalidProbability { index: usize, value: f64 },
    #[error("need at least {min} classes, got {got}")]
    TooFewClasses { min: usize, got: usize },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("operation requires {expected} task, got {got}")]
    WrongTask { expected: &'static str, got: &'static str },
    #[error("degenerate validation split: {0}")]
    DegenerateSplit(String),
    #[error("variance needs T >= 2, got T = {0}")]
    TooFewPasses(usize),
    #[error("ragged tensor: row {row} has {got} entries, expected {expected}")]
    Ragged { row: usize, expected: usize, got: usize },
    #[error("class {0} has no training embeddings")]
    MissingClass(usize),
    #[error("class {class} has {got} training embeddings, need at least {need}")]
    ClassTooSmall { class: usize, got: usize, need: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch { what: &'static str, expected: usize, got: usize },
    #[error("split has no embeddings")]
    MissingEmbeddings,
    #[error("split has no MC-dropout samples")]
    MissingMcSamples,
    #[error("bandwidth must be positive, got {0}")]
    InvalidBandwidth(f64),
    #[error("component count {requested} larger than feasible maximum {feasible}")]
    InfeasibleComponents { requested: usize, feasible: usize },
    #[error("covariance is not positive definite after regularization")]
    NotPositiveDefinite,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("insufficient calibration data: {got} instances, need at least {need}")]
    InsufficientCalibration { got: usize, need: usize },
    #[error("rank table for in-distribution instances is empty")]
    EmptyInDistribution,
    #[error("infeasible synthetic spec: {0}")]
    InfeasibleSpec(String),
    #[error("bad magic in {path}")]
    BadMagic { path: String },
    #[error("unsupported format version {found} in {path} (expected {expected})")]
    VersionMismatch { path: String, found: u32, expected: u32 },
    #[error("checksum mismatch for {path}")]
    ChecksumMismatch { path: String },
    #[error("row-count disagreement in {path}: {detail}")]
    RowCountMismatch { path: String, detail: String },
    #[error("malformed data in {path}: {detail}")]
    Malformed { path: String, detail: String },
    #[error("unknown method `{name}`; available: {available}")]
    UnknownMethod { name: String, available: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable numeric code per failure class, used by the CLI for diagnostics.
    pub fn code(&self) -> u32 {
        match self {
            Error::BadMagic { .. } => 10,
            Error::VersionMismatch { .. } => 11,
            Error::ChecksumMismatch { .. } => 12,
            Error::RowCountMismatch { .. } => 13,
            Error::Malformed { .. } => 14,
            Error::Io { .. } => 15,
            Error::Json(_) | Error::Csv(_) => 16,
            Error::UnknownMethod { .. } => 20,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }

    pub(crate) fn malformed(path: impl AsRef<std::path::Path>, detail: impl Into<String>) -> Self {
        Error::Malformed { path: path.as_ref().display().to_string(), detail: detail.into() }
    }
}
