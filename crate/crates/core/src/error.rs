use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("cell ({row}, {col}) outside {rows}x{cols} grid")]
    OutOfBounds { row: usize, col: usize, rows: usize, cols: usize },

    #[error("insufficient history: need more than {needed} months, have {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("too many features to enumerate coalitions: {count} > {cap}")]
    TooManyFeatures { count: usize, cap: usize },

    #[error("empty station set")]
    NoStations,

    #[error("no fires inside the target area")]
    NoFires,

    #[error("candidate {index} at ({lat}, {lng}) lies outside the target area")]
    OutsideArea { index: usize, lat: f64, lng: f64 },

    #[error("unknown station: {0}")]
    UnknownStation(String),

    #[error("need at least 2 solutions for a correlation matrix, got {0}")]
    TooFewSolutions(usize),

    #[error("bucketing mismatch: {0}")]
    BucketingMismatch(String),

    #[error(transparent)]
    Ingest(#[from] crate::ingest::IngestError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Stable machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Invalid(_) => "invalid_input",
            Error::OutOfBounds { .. } => "out_of_bounds",
            Error::InsufficientHistory { .. } => "insufficient_history",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::TooManyFeatures { .. } => "too_many_features",
            Error::NoStations => "no_stations",
            Error::NoFires => "no_fires",
            Error::OutsideArea { .. } => "outside_area",
            Error::UnknownStation(_) => "unknown_station",
            Error::TooFewSolutions(_) => "too_few_solutions",
            Error::BucketingMismatch(_) => "bucketing_mismatch",
            Error::Ingest(_) => "ingest",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
