use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config is missing required fields: {}", .0.join(", "))]
    MissingFields(Vec<String>),
    #[error("unsupported schemaVersion {0} (expected 1)")]
    UnsupportedSchema(i64),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("dimension mismatch: expected {expected} values, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("{what} = {value} is outside [{min}, {max}]")]
    OutOfRange {
        what: String,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("unknown frame `{0}`")]
    UnknownFrame(String),
    #[error("unknown joint `{0}`")]
    UnknownJoint(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("unknown point cloud format `{0}` (expected csv or ply)")]
    UnknownFormat(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
