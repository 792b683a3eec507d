use thiserror::Error;

use crate::ids::EventId;

/// Failures of chronicle construction, queries and decoding.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChronicleError {
    #[error("invalid entity name {0:?}")]
    InvalidEntity(String),
    #[error("invalid event id {0:?}")]
    InvalidId(String),
    #[error("invalid capability {0:?}")]
    InvalidCapability(String),
    #[error("group name exceeds {max} bytes", max = crate::event::MAX_NAME_LEN)]
    NameTooLong,
    #[error("event references unknown predecessor {0:?}")]
    DanglingPredecessor(EventId),
    #[error("event {0:?} is not in the chronicle")]
    NotInChronicle(EventId),
    #[error("chronicle is not valid")]
    Invalid,
    #[error("timestamp is not downward-closed or references unknown events")]
    DanglingTimestamp,
    #[error("malformed encoding: {0}")]
    Decode(String),
    #[error("stored id {stored:?} does not match computed id {computed:?}")]
    IdMismatch { stored: EventId, computed: EventId },
}
