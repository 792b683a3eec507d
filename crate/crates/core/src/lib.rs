//! Byzantine fault-tolerant group state for local-first collaboration: a
//! hash-linked, partially ordered event log with capability-based access
//! control, brute-force invariant oracles, and a deterministic replica
//! simulator.

pub mod auth;
pub mod chronicle;
pub mod codec;
pub mod error;
pub mod event;
pub mod fixtures;
pub mod ids;
pub mod oracle;
pub mod preset;
pub mod sim;

pub use auth::{
    authorizes, authorizes_precursive, caps, mk_assign, mk_create, mk_grant, mk_revoke, values,
    AuthVerdict, Authorizer, Reason, RevocationScope,
};
pub use chronicle::{CausalIndex, GroupChronicle, Timestamp};
pub use error::ChronicleError;
pub use event::{decode_event, encode_event, event_id, make_event, Event, Invocation};
pub use ids::{Capability, EntityId, EventId};
pub use preset::{build_preset, PolicyPreset, PresetKind};
