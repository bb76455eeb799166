use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point outside the domain: coordinate {index} = {value}")]
    OutOfDomain { index: usize, value: f64 },

    #[error("invalid value for {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error(
        "degenerate scale: long intervals of length {long_len} do not fit an interior \
         cell for every offset (need max_offset + short + long <= 1, got {required})"
    )]
    DegenerateScale { long_len: f64, required: f64 },

    #[error("cell {0:?} is not a long box")]
    NotLongBox(Vec<usize>),

    #[error("anchors {first} and {second} violate the Lipschitz bound by {excess}")]
    LipschitzViolation {
        first: usize,
        second: usize,
        excess: f64,
    },

    #[error("duplicate anchor point {first}/{second} with different values")]
    DuplicateAnchor { first: usize, second: usize },

    #[error("anchor {anchor} is inconsistent with the constraint set: |{value} - {target}| > L * {distance}")]
    InconsistentConstraints {
        anchor: usize,
        value: f64,
        target: f64,
        distance: f64,
    },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("epsilon must lie in (0, 1], got {0}")]
    InvalidEpsilon(f64),

    #[error("label {value} for point {index} is not in {{0, 1}}")]
    NonBinaryLabel { index: usize, value: f64 },

    #[error("linear program failed: {0}")]
    Solver(String),

    #[error("configuration error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("malformed data: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
