use thiserror::Error;

/// Errors produced by the shape-graph library.
#[derive(Debug, Error)]
pub enum Error {
    /// Geometrically degenerate input (zero-length curve, coincident endpoints, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A parameter is outside its documented range.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Malformed input file.
    #[error("parse error: {0}")]
    Parse(String),

    /// Structurally invalid data (unknown ids, endpoint mismatches, ...).
    #[error("data error: {0}")]
    Data(String),

    /// Input exceeds a hard size limit (e.g. exact QAP enumeration).
    #[error("size limit exceeded: {0}")]
    Size(String),

    /// A documented precondition does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
