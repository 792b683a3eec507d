//! Invocations, events, and the canonical byte encoding that event ids hash.
//!
//! Layout of an encoded event (all integers big-endian):
//!
//! ```text
//! version:u8 (= 0x01)
//! pred_count:u32  pred_id[32] * pred_count      (ascending byte order)
//! variant_tag:u8  field*                          (declared order)
//! field = len:u32 bytes[len]
//! ```
//!
//! Entity ids and names are UTF-8, event ids are 32 raw bytes, an absent
//! optional id is a zero-length field and a capability is a one-byte field
//! holding its tag.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::error::ChronicleError;
use crate::ids::{Capability, EntityId, EventId};

pub const FORMAT_VERSION: u8 = 0x01;

/// Longest group name accepted by the decoder, in bytes.
pub const MAX_NAME_LEN: usize = 256;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Invocation {
    Create {
        sbj: EntityId,
    },
    /// `grnt` is absent only for setup grants logged before the create event.
    Grant {
        sbj: EntityId,
        grnt: Option<EventId>,
        cap: Capability,
        obj: EntityId,
    },
    Revoke {
        sbj: EntityId,
        grnt: EventId,
        obj: EventId,
    },
    Assign {
        sbj: EntityId,
        grnt: EventId,
        name: String,
    },
}

impl Invocation {
    pub fn sbj(&self) -> &EntityId {
        match self {
            Invocation::Create { sbj }
            | Invocation::Grant { sbj, .. }
            | Invocation::Revoke { sbj, .. }
            | Invocation::Assign { sbj, .. } => sbj,
        }
    }

    /// The presented authorization claim, if any.
    pub fn grnt(&self) -> Option<EventId> {
        match self {
            Invocation::Create { .. } => None,
            Invocation::Grant { grnt, .. } => *grnt,
            Invocation::Revoke { grnt, .. } | Invocation::Assign { grnt, .. } => Some(*grnt),
        }
    }

    pub fn kind(&self) -> Capability {
        match self {
            Invocation::Create { .. } => Capability::Create,
            Invocation::Grant { .. } => Capability::Grant,
            Invocation::Revoke { .. } => Capability::Revoke,
            Invocation::Assign { .. } => Capability::Assign,
        }
    }

    /// For grants: the capability conferred and its recipient.
    pub fn granted(&self) -> Option<(Capability, &EntityId)> {
        match self {
            Invocation::Grant { cap, obj, .. } => Some((*cap, obj)),
            _ => None,
        }
    }

    /// For revocations: the grant being revoked.
    pub fn revoked(&self) -> Option<EventId> {
        match self {
            Invocation::Revoke { obj, .. } => Some(*obj),
            _ => None,
        }
    }

    pub fn name(&self) -> Option<&str> {
        match self {
            Invocation::Assign { name, .. } => Some(name),
            _ => None,
        }
    }
}

impl fmt::Display for Invocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let claim = |g: Option<EventId>| g.map_or_else(|| "-".to_owned(), |g| g.short());
        match self {
            Invocation::Create { sbj } => write!(f, "create({sbj})"),
            Invocation::Grant {
                sbj,
                grnt,
                cap,
                obj,
            } => {
                write!(f, "grant({sbj}, {}, {cap}, {obj})", claim(*grnt))
            }
            Invocation::Revoke { sbj, grnt, obj } => {
                write!(f, "revoke({sbj}, {}, {})", grnt.short(), obj.short())
            }
            Invocation::Assign { sbj, grnt, name } => {
                write!(f, "assign({sbj}, {}, {name:?})", grnt.short())
            }
        }
    }
}

#[derive(Debug, PartialEq, Eq, Hash)]
struct EventInner {
    id: EventId,
    direct_preds: BTreeSet<EventId>,
    voc: Invocation,
}

/// An invocation bound to the ids of its direct predecessors.
///
/// Cheap to clone; the id is computed once at construction.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Event(Arc<EventInner>);

impl Event {
    pub fn new(direct_preds: BTreeSet<EventId>, voc: Invocation) -> Self {
        let id = digest(&encode_parts(&direct_preds, &voc));
        Self(Arc::new(EventInner {
            id,
            direct_preds,
            voc,
        }))
    }

    pub fn id(&self) -> EventId {
        self.0.id
    }

    pub fn direct_preds(&self) -> &BTreeSet<EventId> {
        &self.0.direct_preds
    }

    pub fn voc(&self) -> &Invocation {
        &self.0.voc
    }

    pub fn kind(&self) -> Capability {
        self.0.voc.kind()
    }
}

impl fmt::Debug for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Event({} {})", self.id().short(), self.voc())
    }
}

pub fn make_event(frontier: BTreeSet<EventId>, voc: Invocation) -> Event {
    Event::new(frontier, voc)
}

pub fn event_id(e: &Event) -> EventId {
    e.id()
}

pub fn encode_event(e: &Event) -> Vec<u8> {
    encode_parts(e.direct_preds(), e.voc())
}

fn digest(bytes: &[u8]) -> EventId {
    let out = Sha256::digest(bytes);
    let mut id = [0u8; 32];
    id.copy_from_slice(&out);
    EventId::from_bytes(id)
}

fn put_field(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
    out.extend_from_slice(bytes);
}

fn encode_parts(preds: &BTreeSet<EventId>, voc: &Invocation) -> Vec<u8> {
    let mut out = Vec::with_capacity(1 + 4 + 32 * preds.len() + 96);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&(preds.len() as u32).to_be_bytes());
    // BTreeSet iterates in ascending byte order.
    for p in preds {
        out.extend_from_slice(p.as_bytes());
    }
    out.push(voc.kind().tag());
    match voc {
        Invocation::Create { sbj } => put_field(&mut out, sbj.as_bytes()),
        Invocation::Grant {
            sbj,
            grnt,
            cap,
            obj,
        } => {
            put_field(&mut out, sbj.as_bytes());
            put_field(
                &mut out,
                grnt.as_ref().map_or(&[][..], |g| &g.as_bytes()[..]),
            );
            put_field(&mut out, &[cap.tag()]);
            put_field(&mut out, obj.as_bytes());
        }
        Invocation::Revoke { sbj, grnt, obj } => {
            put_field(&mut out, sbj.as_bytes());
            put_field(&mut out, grnt.as_bytes());
            put_field(&mut out, obj.as_bytes());
        }
        Invocation::Assign { sbj, grnt, name } => {
            put_field(&mut out, sbj.as_bytes());
            put_field(&mut out, grnt.as_bytes());
            put_field(&mut out, name.as_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ChronicleError> {
        if self.buf.len() < n {
            return Err(ChronicleError::Decode("truncated".into()));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, ChronicleError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, ChronicleError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn id(&mut self) -> Result<EventId, ChronicleError> {
        let mut out = [0u8; 32];
        out.copy_from_slice(self.take(32)?);
        Ok(EventId::from_bytes(out))
    }

    fn field(&mut self) -> Result<&'a [u8], ChronicleError> {
        let len = self.u32()? as usize;
        self.take(len)
    }

    fn entity(&mut self) -> Result<EntityId, ChronicleError> {
        let raw = self.field()?;
        let s = std::str::from_utf8(raw)
            .map_err(|_| ChronicleError::Decode("entity not utf-8".into()))?;
        EntityId::new(s)
    }

    fn id_field(&mut self) -> Result<EventId, ChronicleError> {
        self.opt_id_field()?
            .ok_or_else(|| ChronicleError::Decode("missing event id".into()))
    }

    fn opt_id_field(&mut self) -> Result<Option<EventId>, ChronicleError> {
        let raw = self.field()?;
        match raw.len() {
            0 => Ok(None),
            32 => {
                let mut out = [0u8; 32];
                out.copy_from_slice(raw);
                Ok(Some(EventId::from_bytes(out)))
            }
            n => Err(ChronicleError::Decode(format!(
                "event id field of {n} bytes"
            ))),
        }
    }
}

/// Strict inverse of [`encode_event`]: rejects trailing bytes, unknown tags and
/// predecessor lists that are not strictly ascending.
pub fn decode_event(bytes: &[u8]) -> Result<Event, ChronicleError> {
    let mut r = Reader { buf: bytes };
    let version = r.u8()?;
    if version != FORMAT_VERSION {
        return Err(ChronicleError::Decode(format!(
            "unknown format version {version}"
        )));
    }
    let count = r.u32()? as usize;
    if count > r.buf.len() / 32 {
        return Err(ChronicleError::Decode(
            "predecessor count exceeds input".into(),
        ));
    }
    let mut preds = BTreeSet::new();
    let mut last: Option<EventId> = None;
    for _ in 0..count {
        let id = r.id()?;
        if last.is_some_and(|l| l >= id) {
            return Err(ChronicleError::Decode(
                "predecessors not strictly ascending".into(),
            ));
        }
        last = Some(id);
        preds.insert(id);
    }
    let tag = r.u8()?;
    let kind = Capability::from_tag(tag)
        .ok_or_else(|| ChronicleError::Decode(format!("unknown invocation tag {tag:#04x}")))?;
    let voc = match kind {
        Capability::Create => Invocation::Create { sbj: r.entity()? },
        Capability::Grant => {
            let sbj = r.entity()?;
            let grnt = r.opt_id_field()?;
            let cap = match r.field()? {
                [t] => Capability::from_tag(*t).ok_or_else(|| {
                    ChronicleError::Decode(format!("unknown capability tag {t:#04x}"))
                })?,
                _ => {
                    return Err(ChronicleError::Decode(
                        "capability field must be one byte".into(),
                    ))
                }
            };
            let obj = r.entity()?;
            Invocation::Grant {
                sbj,
                grnt,
                cap,
                obj,
            }
        }
        Capability::Revoke => Invocation::Revoke {
            sbj: r.entity()?,
            grnt: r.id_field()?,
            obj: r.id_field()?,
        },
        Capability::Assign => {
            let sbj = r.entity()?;
            let grnt = r.id_field()?;
            let raw = r.field()?;
            if raw.len() > MAX_NAME_LEN {
                return Err(ChronicleError::NameTooLong);
            }
            let name = std::str::from_utf8(raw)
                .map_err(|_| ChronicleError::Decode("name not utf-8".into()))?
                .to_owned();
            Invocation::Assign { sbj, grnt, name }
        }
    };
    if !r.buf.is_empty() {
        return Err(ChronicleError::Decode("trailing bytes".into()));
    }
    Ok(Event::new(preds, voc))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ent(s: &str) -> EntityId {
        EntityId::new(s).unwrap()
    }

    #[test]
    fn genesis_event_has_no_predecessors() {
        let e = make_event(BTreeSet::new(), Invocation::Create { sbj: ent("A") });
        assert!(e.direct_preds().is_empty());
        assert_eq!(event_id(&e), event_id(&e));
    }

    #[test]
    fn predecessor_insertion_order_is_irrelevant() {
        let a = EventId::from_bytes([1; 32]);
        let b = EventId::from_bytes([2; 32]);
        let voc = Invocation::Create { sbj: ent("A") };
        let e1 = make_event([a, b].into_iter().collect(), voc.clone());
        let e2 = make_event([b, a].into_iter().collect(), voc);
        assert_eq!(encode_event(&e1), encode_event(&e2));
        assert_eq!(e1.id(), e2.id());
    }

    #[test]
    fn encoding_layout_of_a_setup_grant() {
        let e = make_event(
            BTreeSet::new(),
            Invocation::Grant {
                sbj: ent("A"),
                grnt: None,
                cap: Capability::Assign,
                obj: ent("B"),
            },
        );
        let expected: Vec<u8> = [
            &[0x01, 0, 0, 0, 0, 0x02][..],
            &[0, 0, 0, 1, b'A'],
            &[0, 0, 0, 0],
            &[0, 0, 0, 1, 0x04],
            &[0, 0, 0, 1, b'B'],
        ]
        .concat();
        assert_eq!(encode_event(&e), expected);
    }

    #[test]
    fn decode_rejects_non_canonical_input() {
        let a = EventId::from_bytes([1; 32]);
        let e = make_event(
            [a].into_iter().collect(),
            Invocation::Assign {
                sbj: ent("A"),
                grnt: a,
                name: "x".into(),
            },
        );
        let bytes = encode_event(&e);
        assert_eq!(decode_event(&bytes).unwrap(), e);

        let mut trailing = bytes.clone();
        trailing.push(0);
        assert!(decode_event(&trailing).is_err());
        assert!(decode_event(&bytes[..bytes.len() - 1]).is_err());

        let mut bad_version = bytes.clone();
        bad_version[0] = 2;
        assert!(decode_event(&bad_version).is_err());

        // two identical predecessors violate strict ordering
        let mut dup = vec![0x01, 0, 0, 0, 2];
        dup.extend_from_slice(&[1; 32]);
        dup.extend_from_slice(&[1; 32]);
        dup.extend_from_slice(&bytes[1 + 4 + 32..]);
        assert!(decode_event(&dup).is_err());
    }

    #[test]
    fn decode_rejects_long_names() {
        let e = make_event(
            BTreeSet::new(),
            Invocation::Assign {
                sbj: ent("A"),
                grnt: EventId::from_bytes([0; 32]),
                name: "n".repeat(MAX_NAME_LEN + 1),
            },
        );
        assert_eq!(
            decode_event(&encode_event(&e)),
            Err(ChronicleError::NameTooLong)
        );
    }
}
