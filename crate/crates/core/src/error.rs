use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{scheme} cannot sample from a dataset of {n} samples")]
    SchemeSize { scheme: String, n: u64 },

    #[error("poisoning intensity {rho} is out of range for {n} samples under {model}")]
    IntensityOutOfRange { model: String, n: u64, rho: u64 },

    #[error("malformed vote record `{id}`: {reason}")]
    MalformedVote { id: String, reason: String },

    #[error("record `{0}` has no true label")]
    MissingLabel(String),

    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("prior knowledge violated: {0}")]
    PriorKnowledge(String),

    #[error("oracle cap exceeded: {0}")]
    CapExceeded(String),
}

pub type Result<T> = std::result::Result<T, Error>;
