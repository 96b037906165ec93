use thiserror::Error;

/// Every fallible operation in the crate returns this error.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("cyclic graph: {}", .0.join(" -> "))]
    CyclicGraph(Vec<String>),
    #[error("adjustment set contains descendants of the treatment ({0}); use the extended check")]
    RoutedToExtended(String),
    #[error("resource limit: {0}")]
    ResourceLimit(String),
    #[error("zero-probability conditioning: {0}")]
    ZeroProbability(String),
    #[error("positivity violation: {0}")]
    Positivity(String),
    #[error("singular conditioning block: {0}")]
    SingularConditioning(String),
    #[error("weak instrument: {0}")]
    WeakInstrument(String),
    #[error("sampling budget exhausted: {0}")]
    Exhaustion(String),
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("structure mismatch: {0}")]
    Structure(String),
    #[error("invalid model: {}", .0.join("; "))]
    InvalidModel(Vec<String>),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable numeric code, shared with the C interface.
    pub fn code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) => 1,
            Error::CyclicGraph(_) => 2,
            Error::RoutedToExtended(_) => 3,
            Error::ResourceLimit(_) => 4,
            Error::ZeroProbability(_) => 5,
            Error::Positivity(_) => 6,
            Error::SingularConditioning(_) => 7,
            Error::WeakInstrument(_) => 8,
            Error::Exhaustion(_) => 9,
            Error::Constraint(_) => 10,
            Error::Structure(_) => 11,
            Error::InvalidModel(_) => 12,
            Error::Parse(_) => 13,
            Error::Io(_) => 14,
        }
    }
}

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

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
