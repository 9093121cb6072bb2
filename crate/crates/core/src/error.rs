//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("invalid weight: {0}")]
    InvalidWeight(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("unknown input label: {0}")]
    UnknownLabel(String),
    #[error("unsupported randomizer kind for this operation: {0}")]
    UnsupportedKind(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("LDP violation: {0}")]
    LdpViolation(String),
    #[error("not a blanket decomposition: {0}")]
    NotBlanketDecomposition(String),
    #[error("dominance violation: {0}")]
    DominanceViolation(String),
    #[error("invalid decomposition: {0}")]
    InvalidDecomposition(String),
    #[error("empty composition list")]
    EmptyComposition,
    #[error("search failed: {0}")]
    SearchRange(String),
    #[error("size limit exceeded: {0}")]
    SizeLimit(String),
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by memory or size limits rather than bad input.
    pub fn is_resource(&self) -> bool {
        matches!(self, Error::Resource(_) | Error::SizeLimit(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
