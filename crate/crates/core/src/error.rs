use thiserror::Error;

/// Errors raised by the library.
///
/// Variants are grouped by the kind of failure rather than by module, so the
/// CLI can map them onto exit codes without knowing which pipeline failed.
#[derive(Debug, Error)]
pub enum Error {
    /// Input bytes could not be parsed (XML, CSV, JSON, binary vector files).
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A record inside an otherwise well-formed document is unusable.
    #[error("invalid record {id}: {message}")]
    Record { id: String, message: String },

    /// Arguments or configuration violate a documented precondition.
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// Unit vectors summed to (near) zero, so no mean direction exists.
    #[error("degenerate spherical mean (resultant norm {norm:e})")]
    DegenerateMean { norm: f64 },

    #[error("unknown query `{0}`")]
    UnknownQuery(String),

    #[error("unknown concept `{0}`")]
    UnknownConcept(String),

    /// A model-driven strategy was asked to select before any model exists.
    #[error("strategy {0} needs a trained model; run the seed round first")]
    ModelRequired(&'static str),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
