use thiserror::Error;

/// Errors raised by the laboratory. Every variant maps onto a stable
/// kebab-case code (see [`Error::code`]) that the CLI prints verbatim.
#[derive(Debug, Error)]
pub enum Error {
    #[error("spec-mismatch: {0}")]
    SpecMismatch(String),
    #[error("concentration-unavailable: {0}")]
    ConcentrationUnavailable(String),
    #[error("invalid-argument: {0}")]
    InvalidArgument(String),
    #[error("invalid-matrix: {0}")]
    InvalidMatrix(String),
    #[error("not-symmetric: max asymmetry {0:e}")]
    NotSymmetric(f64),
    #[error("bad-k: k = {k} outside [{min}, {max}]")]
    BadK { k: usize, min: usize, max: usize },
    #[error("dimension-mismatch: {0}")]
    DimensionMismatch(String),
    #[error("index-out-of-range: index {index} with dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("not-unit: norm {0}")]
    NotUnit(f64),
    #[error("not-orthonormal: Gram deviation {0:e}")]
    NotOrthonormal(f64),
    #[error("subset-too-small: |J| = {size} < k = {k}")]
    SubsetTooSmall { size: usize, k: usize },
    #[error("too-large: {candidates} candidates exceed budget {budget}")]
    TooLarge { candidates: u128, budget: u128 },
    #[error("rank-deficient: {0}")]
    RankDeficient(String),
    #[error("zero-matrix")]
    ZeroMatrix,
    #[error("invalid-event: {0}")]
    InvalidEvent(String),
    #[error("empty-grid")]
    EmptyGrid,
    #[error("underpowered: {usable} usable points, about {suggested_trials} trials per point needed")]
    Underpowered { usable: usize, suggested_trials: u64 },
    #[error("no-events: no qualifying trial in {trials} trials")]
    NoEvents { trials: u64 },
    #[error("invalid-config: {field}: {reason}")]
    InvalidConfig { field: String, reason: String },
    #[error("parse-error: line {line}: {reason}")]
    Parse { line: u64, reason: String },
    #[error("numeric-failure: {0}")]
    Numeric(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::SpecMismatch(_) => "spec-mismatch",
            Error::ConcentrationUnavailable(_) => "concentration-unavailable",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::InvalidMatrix(_) => "invalid-matrix",
            Error::NotSymmetric(_) => "not-symmetric",
            Error::BadK { .. } => "bad-k",
            Error::DimensionMismatch(_) => "dimension-mismatch",
            Error::IndexOutOfRange { .. } => "index-out-of-range",
            Error::NotUnit(_) => "not-unit",
            Error::NotOrthonormal(_) => "not-orthonormal",
            Error::SubsetTooSmall { .. } => "subset-too-small",
            Error::TooLarge { .. } => "too-large",
            Error::RankDeficient(_) => "rank-deficient",
            Error::ZeroMatrix => "zero-matrix",
            Error::InvalidEvent(_) => "invalid-event",
            Error::EmptyGrid => "empty-grid",
            Error::Underpowered { .. } => "underpowered",
            Error::NoEvents { .. } => "no-events",
            Error::InvalidConfig { .. } => "invalid-config",
            Error::Parse { .. } => "parse-error",
            Error::Numeric(_) => "numeric-failure",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
