//! Crate-wide error type.

use ptinfer_he::HeError;

use crate::Role;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("value {value} overflows the representable range")]
    Overflow { value: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("{needed} slots needed, {available} available")]
    CapacityExceeded { needed: usize, available: usize },
    #[error(transparent)]
    He(#[from] HeError),
    #[error("handshake mismatch: local {local:#x}, peer {peer:#x}")]
    HandshakeMismatch { local: u32, peer: u32 },
    #[error("handshake: both endpoints claim role {0:?}")]
    RoleClash(Role),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("peer closed the session")]
    PeerClosed,
    #[error("unexpected frame: {0}")]
    Frame(String),
    #[error("gadget {0} is not available from this provider")]
    GadgetUnavailable(&'static str),
    #[error("gadget input {index} outside its domain: {detail}")]
    DomainError { index: usize, detail: String },
    #[error("gadget input {index} out of range: {detail}")]
    RangeError { index: usize, detail: String },
    #[error("row {row} has zero variance")]
    DegenerateRow { row: usize },
    #[error("no root found in [{lo}, {hi}]")]
    NoRootFound { lo: f64, hi: f64 },
    #[error("ill-conditioned least-squares system")]
    IllConditioned,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wraps an error with the name of the pipeline stage that raised it.
    pub fn at(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error below any stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
