//! Identifier newtypes shared by every layer: entities, events and capabilities.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ChronicleError;

/// Longest entity name accepted, in bytes.
pub const MAX_ENTITY_LEN: usize = 64;

/// Name of a participant (a subject or object of an invocation).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EntityId(String);

impl EntityId {
    pub fn new(name: impl Into<String>) -> Result<Self, ChronicleError> {
        let name = name.into();
        if name.is_empty()
            || name.len() > MAX_ENTITY_LEN
            || !name
                .chars()
                .all(|c| c.is_ascii_graphic() || (!c.is_ascii() && !c.is_control()))
        {
            return Err(ChronicleError::InvalidEntity(name));
        }
        Ok(Self(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }
}

impl fmt::Debug for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EntityId({})", self.0)
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for EntityId {
    type Err = ChronicleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl TryFrom<String> for EntityId {
    type Error = ChronicleError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<EntityId> for String {
    fn from(value: EntityId) -> Self {
        value.0
    }
}

/// SHA-256 digest of an event's canonical encoding.
///
/// The byte-wise ordering exists for deterministic iteration and output only;
/// it carries no causal meaning.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventId([u8; 32]);

impl EventId {
    pub const LEN: usize = 32;

    pub const fn from_bytes(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// First eight hex digits, for labels.
    pub fn short(&self) -> String {
        hex::encode(&self.0[..4])
    }

    pub fn from_hex(s: &str) -> Result<Self, ChronicleError> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out).map_err(|_| ChronicleError::InvalidId(s.to_owned()))?;
        Ok(Self(out))
    }
}

impl fmt::Debug for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EventId({})", self.short())
    }
}

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for EventId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for EventId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        EventId::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// Operation subtype an invocation belongs to, and the right a grant confers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Capability {
    Create,
    Grant,
    Revoke,
    Assign,
}

impl Capability {
    pub const ALL: [Capability; 4] = [
        Capability::Create,
        Capability::Grant,
        Capability::Revoke,
        Capability::Assign,
    ];

    pub(crate) fn tag(self) -> u8 {
        match self {
            Capability::Create => 0x01,
            Capability::Grant => 0x02,
            Capability::Revoke => 0x03,
            Capability::Assign => 0x04,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        Capability::ALL.into_iter().find(|c| c.tag() == tag)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Capability::Create => "create",
            Capability::Grant => "grant",
            Capability::Revoke => "revoke",
            Capability::Assign => "assign",
        }
    }
}

impl fmt::Display for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Capability {
    type Err = ChronicleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Capability::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| ChronicleError::InvalidCapability(s.to_owned()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entity_rejects_empty_long_and_control() {
        assert!(EntityId::new("").is_err());
        assert!(EntityId::new("a".repeat(65)).is_err());
        assert!(EntityId::new("a b").is_err());
        assert!(EntityId::new("a\n").is_err());
        assert!(EntityId::new("a".repeat(64)).is_ok());
        assert_eq!(EntityId::new("alice").unwrap().as_str(), "alice");
    }

    #[test]
    fn event_id_hex_round_trip() {
        let id = EventId::from_bytes([0xab; 32]);
        assert_eq!(EventId::from_hex(&id.to_hex()).unwrap(), id);
        assert_eq!(id.short(), "abababab");
        assert!(EventId::from_hex("zz").is_err());
    }

    #[test]
    fn capability_tags_are_distinct() {
        for c in Capability::ALL {
            assert_eq!(Capability::from_tag(c.tag()), Some(c));
            assert_eq!(c.as_str().parse::<Capability>().unwrap(), c);
        }
        assert_eq!(Capability::from_tag(0), None);
    }
}
