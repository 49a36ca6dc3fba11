use thiserror::Error;

/// Errors surfaced by the composition stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("no concretes")]
    NoConcretes,
    #[error("functionally incoherent group: {0}")]
    IncoherentGroup(String),
    #[error("invalid QoS vector: {0}")]
    InvalidQos(String),
    #[error("invalid QoS weights: {0}")]
    InvalidWeights(String),
    #[error("malformed premise: {0:?}")]
    MalformedPremise(String),
    #[error("empty goal set")]
    EmptyGoals,
    #[error("unmapped concept: {0}")]
    UnmappedConcept(String),
    #[error("duplicate id: {0}")]
    DuplicateId(String),
    #[error("behavior {0} has overlapping add and delete lists")]
    AddDeleteOverlap(String),
    #[error("invalid behavior-network parameters: {0}")]
    InvalidParams(String),
    #[error("regime constraint violated: {0}")]
    RegimeConstraint(String),
    #[error("unknown invocation id {0}")]
    UnknownInvocation(u64),
    #[error("no requests issued")]
    NoRequestsIssued,
    #[error("invalid config key `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },
    #[error("catalog too small: {available} services for density {density}")]
    CatalogTooSmall { available: usize, density: usize },
    #[error("slipnet topology is not dissipative at concept {0}")]
    NotDissipative(String),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error("io: {0}")]
    Io(String),
    #[error("parse: {0}")]
    Parse(String),
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
