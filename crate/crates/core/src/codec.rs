//! Chronicle file format and debug exports.
//!
//! A chronicle file is a sequence of records in topological order:
//!
//! ```text
//! id[32]  len:u32 (big-endian)  canonical_event[len]
//! ```
//!
//! The loader recomputes every id from the canonical bytes, rejects
//! non-canonical encodings and requires each record's predecessors to appear
//! earlier in the file.

use std::fmt::Write as _;

use serde::Serialize;

use crate::auth::Authorizer;
use crate::chronicle::GroupChronicle;
use crate::error::ChronicleError;
use crate::event::{decode_event, encode_event, Event, Invocation};
use crate::ids::{Capability, EntityId, EventId};

pub fn encode_chronicle(g: &GroupChronicle) -> Vec<u8> {
    let mut out = Vec::new();
    for e in g.topological() {
        let bytes = encode_event(&e);
        out.extend_from_slice(e.id().as_bytes());
        out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
        out.extend_from_slice(&bytes);
    }
    out
}

/// Decodes a chronicle file. Validity of the group (unique create event and
/// so on) is checked separately, so partial or setup-only chronicles load.
pub fn decode_chronicle(bytes: &[u8]) -> Result<GroupChronicle, ChronicleError> {
    let mut g = GroupChronicle::new();
    let mut rest = bytes;
    while !rest.is_empty() {
        if rest.len() < 36 {
            return Err(ChronicleError::Decode("truncated record header".into()));
        }
        let mut stored = [0u8; 32];
        stored.copy_from_slice(&rest[..32]);
        let stored = EventId::from_bytes(stored);
        let len = u32::from_be_bytes([rest[32], rest[33], rest[34], rest[35]]) as usize;
        rest = &rest[36..];
        if rest.len() < len {
            return Err(ChronicleError::Decode("truncated record body".into()));
        }
        let e = decode_event(&rest[..len])?;
        rest = &rest[len..];
        if e.id() != stored {
            return Err(ChronicleError::IdMismatch {
                stored,
                computed: e.id(),
            });
        }
        g.insert(e)?;
    }
    Ok(g)
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum JsonVoc<'a> {
    Create {
        sbj: &'a EntityId,
    },
    Grant {
        sbj: &'a EntityId,
        grnt: Option<EventId>,
        cap: Capability,
        obj: &'a EntityId,
    },
    Revoke {
        sbj: &'a EntityId,
        grnt: EventId,
        obj: EventId,
    },
    Assign {
        sbj: &'a EntityId,
        grnt: EventId,
        name: &'a str,
    },
}

#[derive(Serialize)]
struct JsonEvent<'a> {
    id: EventId,
    preds: Vec<EventId>,
    voc: JsonVoc<'a>,
}

fn json_voc(v: &Invocation) -> JsonVoc<'_> {
    match v {
        Invocation::Create { sbj } => JsonVoc::Create { sbj },
        Invocation::Grant {
            sbj,
            grnt,
            cap,
            obj,
        } => JsonVoc::Grant {
            sbj,
            grnt: *grnt,
            cap: *cap,
            obj,
        },
        Invocation::Revoke { sbj, grnt, obj } => JsonVoc::Revoke {
            sbj,
            grnt: *grnt,
            obj: *obj,
        },
        Invocation::Assign { sbj, grnt, name } => JsonVoc::Assign {
            sbj,
            grnt: *grnt,
            name,
        },
    }
}

/// One object per event, in id order. Not a hash preimage.
pub fn to_json(g: &GroupChronicle) -> String {
    let events: Vec<JsonEvent<'_>> = g
        .iter()
        .map(|e: &Event| JsonEvent {
            id: e.id(),
            preds: e.direct_preds().iter().copied().collect(),
            voc: json_voc(e.voc()),
        })
        .collect();
    serde_json::to_string_pretty(&events).expect("plain data serializes")
}

/// Graphviz rendering: one node per event labeled with its short id, kind and
/// (for valid chronicles) its verdict; one edge per predecessor link.
pub fn to_dot(g: &GroupChronicle) -> String {
    let auth = Authorizer::new(g).ok();
    let mut out = String::from("digraph chronicle {\n  rankdir=BT;\n");
    for e in g.iter() {
        let verdict = auth
            .as_ref()
            .and_then(|a| a.verdict_of(&e.id()))
            .map_or_else(String::new, |v| format!("\\n{}", v.reason));
        let _ = writeln!(
            out,
            "  \"{}\" [label=\"{} {}{}\"];",
            e.id().short(),
            e.id().short(),
            e.kind(),
            verdict
        );
    }
    for e in g.iter() {
        for p in e.direct_preds() {
            let _ = writeln!(out, "  \"{}\" -> \"{}\";", e.id().short(), p.short());
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn chronicle_file_round_trip() {
        let g = fixtures::s2().chronicle;
        let bytes = encode_chronicle(&g);
        assert_eq!(decode_chronicle(&bytes).unwrap(), g);
        assert_eq!(decode_chronicle(&[]).unwrap(), GroupChronicle::new());
    }

    #[test]
    fn tampering_is_detected() {
        let g = fixtures::s0().chronicle;
        let bytes = encode_chronicle(&g);
        for pos in 0..bytes.len() {
            let mut t = bytes.clone();
            t[pos] ^= 0x01;
            assert!(
                decode_chronicle(&t).is_err(),
                "flip at byte {pos} went unnoticed"
            );
        }
    }

    #[test]
    fn records_out_of_order_are_rejected() {
        let g = fixtures::s0().chronicle;
        let order = g.topological();
        let mut bytes = Vec::new();
        for e in order.iter().rev() {
            let enc = encode_event(e);
            bytes.extend_from_slice(e.id().as_bytes());
            bytes.extend_from_slice(&(enc.len() as u32).to_be_bytes());
            bytes.extend_from_slice(&enc);
        }
        assert!(matches!(
            decode_chronicle(&bytes),
            Err(ChronicleError::DanglingPredecessor(_))
        ));
    }

    #[test]
    fn dot_export_of_s1() {
        let g = fixtures::s1().chronicle;
        let dot = to_dot(&g);
        assert_eq!(dot.matches("[label=").count(), g.len());
        assert_eq!(dot.matches(" -> ").count(), 4);
        assert!(dot.contains("RevokedConcurrently"));
    }

    #[test]
    fn json_export_shape() {
        let g = fixtures::s0().chronicle;
        let v: serde_json::Value = serde_json::from_str(&to_json(&g)).unwrap();
        let arr = v.as_array().unwrap();
        assert_eq!(arr.len(), 2);
        let grant = arr.iter().find(|o| o["voc"]["type"] == "grant").unwrap();
        assert_eq!(grant["voc"]["cap"], "assign");
        assert!(grant["voc"]["grnt"].is_null());
        assert_eq!(grant["id"].as_str().unwrap().len(), 64);
    }
}
