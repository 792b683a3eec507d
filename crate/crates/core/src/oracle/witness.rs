//! Violation witness files: a short text header, a blank line, then the
//! chronicle in the chronicle file format (followed by the second chronicle
//! for convergence failures).
//!
//! ```text
//! chronicap-witness 1
//! invariant revocation-safety
//! scope precursors-only
//! event <hex of canonical encoding>
//! invocation <hex of canonical encoding with no predecessors>
//! timestamp <id> <id> ...
//! detail <free text>
//! repro <command line>
//! chronicle-bytes <n>
//! other-bytes <n>
//!
//! <chronicle file bytes><other chronicle file bytes>
//! ```

use std::collections::BTreeSet;

use crate::auth::{Authorizer, RevocationScope};
use crate::chronicle::{GroupChronicle, Timestamp};
use crate::codec::{decode_chronicle, encode_chronicle};
use crate::error::ChronicleError;
use crate::event::{decode_event, encode_event, make_event};
use crate::ids::EventId;
use crate::oracle::check::{
    check_authorization_safety, check_oracle_equivalence, check_query_safety,
    check_revocation_safety_with, CheckError, Invariant, Violation,
};

const MAGIC: &str = "chronicap-witness 1";

#[derive(Debug, thiserror::Error)]
pub enum WitnessError {
    #[error("malformed witness: {0}")]
    Malformed(String),
    #[error(transparent)]
    Chronicle(#[from] ChronicleError),
    #[error(transparent)]
    Check(#[from] CheckError),
}

fn malformed(msg: impl Into<String>) -> WitnessError {
    WitnessError::Malformed(msg.into())
}

fn scope_str(s: RevocationScope) -> &'static str {
    match s {
        RevocationScope::PrecursorsAndConcurrent => "precursors-and-concurrent",
        RevocationScope::PrecursorsOnly => "precursors-only",
    }
}

pub fn encode_witness(v: &Violation, repro: Option<&str>) -> Vec<u8> {
    let chronicle = encode_chronicle(&v.chronicle);
    let other = v.other.as_ref().map(encode_chronicle);
    let mut head = vec![MAGIC.to_owned(), format!("invariant {}", v.invariant)];
    head.push(format!("scope {}", scope_str(v.scope)));
    if let Some(e) = &v.event {
        head.push(format!("event {}", hex::encode(encode_event(e))));
    }
    if let Some(inv) = &v.invocation {
        let carrier = make_event(BTreeSet::new(), inv.clone());
        head.push(format!(
            "invocation {}",
            hex::encode(encode_event(&carrier))
        ));
    }
    if let Some(t) = &v.timestamp {
        let ids: Vec<String> = t.ids().iter().map(EventId::to_hex).collect();
        head.push(format!("timestamp {}", ids.join(" ")).trim_end().to_owned());
    }
    head.push(format!("detail {}", v.detail.replace('\n', " ")));
    if let Some(r) = repro {
        head.push(format!("repro {}", r.replace('\n', " ")));
    }
    head.push(format!("chronicle-bytes {}", chronicle.len()));
    if let Some(o) = &other {
        head.push(format!("other-bytes {}", o.len()));
    }
    let mut out = head.join("\n").into_bytes();
    out.extend_from_slice(b"\n\n");
    out.extend_from_slice(&chronicle);
    if let Some(o) = other {
        out.extend_from_slice(&o);
    }
    out
}

/// A decoded witness: the recorded violation and the reproduction command, if
/// any.
#[derive(Clone, Debug)]
pub struct Witness {
    pub violation: Violation,
    pub repro: Option<String>,
}

pub fn decode_witness(bytes: &[u8]) -> Result<Witness, WitnessError> {
    let split = bytes
        .windows(2)
        .position(|w| w == b"\n\n")
        .ok_or_else(|| malformed("missing blank line after header"))?;
    let header =
        std::str::from_utf8(&bytes[..split]).map_err(|_| malformed("header is not UTF-8"))?;
    let body = &bytes[split + 2..];
    let mut lines = header.lines();
    if lines.next() != Some(MAGIC) {
        return Err(malformed("bad magic line"));
    }
    let mut invariant = None;
    let mut scope = RevocationScope::default();
    let mut event = None;
    let mut invocation = None;
    let mut timestamp = None;
    let mut detail = String::new();
    let mut repro = None;
    let mut chronicle_len = None;
    let mut other_len = None;
    for line in lines {
        let (key, value) = line.split_once(' ').unwrap_or((line, ""));
        match key {
            "invariant" => {
                invariant = Some(
                    Invariant::parse(value)
                        .ok_or_else(|| malformed(format!("unknown invariant {value:?}")))?,
                )
            }
            "scope" => {
                scope = match value {
                    "precursors-and-concurrent" => RevocationScope::PrecursorsAndConcurrent,
                    "precursors-only" => RevocationScope::PrecursorsOnly,
                    other => return Err(malformed(format!("unknown scope {other:?}"))),
                }
            }
            "event" => {
                let raw = hex::decode(value).map_err(|_| malformed("event is not hex"))?;
                event = Some(decode_event(&raw)?);
            }
            "invocation" => {
                let raw = hex::decode(value).map_err(|_| malformed("invocation is not hex"))?;
                invocation = Some(decode_event(&raw)?.voc().clone());
            }
            "timestamp" => {
                let ids = value
                    .split_whitespace()
                    .map(EventId::from_hex)
                    .collect::<Result<Vec<_>, _>>()?;
                timestamp = Some(Timestamp::from_ids(ids));
            }
            "detail" => detail = value.to_owned(),
            "repro" => repro = Some(value.to_owned()),
            "chronicle-bytes" => {
                chronicle_len = Some(
                    value
                        .parse::<usize>()
                        .map_err(|_| malformed("bad chronicle-bytes"))?,
                )
            }
            "other-bytes" => {
                other_len = Some(
                    value
                        .parse::<usize>()
                        .map_err(|_| malformed("bad other-bytes"))?,
                )
            }
            other => return Err(malformed(format!("unknown header field {other:?}"))),
        }
    }
    let invariant = invariant.ok_or_else(|| malformed("missing invariant"))?;
    let chronicle_len = chronicle_len.ok_or_else(|| malformed("missing chronicle-bytes"))?;
    let expected = chronicle_len + other_len.unwrap_or(0);
    if body.len() != expected {
        return Err(malformed(format!(
            "body has {} bytes, header says {expected}",
            body.len()
        )));
    }
    let chronicle = decode_chronicle(&body[..chronicle_len])?;
    let other = other_len
        .map(|_| decode_chronicle(&body[chronicle_len..]))
        .transpose()?;
    Ok(Witness {
        violation: Violation {
            invariant,
            chronicle,
            event,
            invocation,
            timestamp,
            other,
            scope,
            detail,
        },
        repro,
    })
}

/// Re-runs the checker the witness names on the recorded inputs. Returns the
/// violation it finds now, if any.
pub fn replay(w: &Witness) -> Result<Option<Violation>, WitnessError> {
    let v = &w.violation;
    let need_event = || {
        v.event
            .as_ref()
            .ok_or_else(|| malformed("witness lacks an event"))
    };
    Ok(match v.invariant {
        Invariant::AuthorizationSafety => check_authorization_safety(&v.chronicle, need_event()?)?,
        Invariant::QuerySafety => check_query_safety(&v.chronicle, need_event()?)?,
        Invariant::RevocationSafety => {
            let inv = v
                .invocation
                .as_ref()
                .ok_or_else(|| malformed("witness lacks an invocation"))?;
            check_revocation_safety_with(&v.chronicle, inv, v.scope)?
        }
        Invariant::OracleMismatch => check_oracle_equivalence(&v.chronicle)?,
        Invariant::Convergence => {
            let other = v
                .other
                .as_ref()
                .ok_or_else(|| malformed("witness lacks a second chronicle"))?;
            convergence_difference(&v.chronicle, other)?.map(|detail| Violation {
                other: Some(other.clone()),
                ..Violation::new(Invariant::Convergence, v.chronicle.clone(), detail)
            })
        }
    })
}

/// Why two replicas' states differ, or `None` if they agree on events, caps
/// and values.
pub fn convergence_difference(
    a: &GroupChronicle,
    b: &GroupChronicle,
) -> Result<Option<String>, ChronicleError> {
    if encode_chronicle(a) != encode_chronicle(b) {
        return Ok(Some(format!(
            "chronicles differ ({} vs {} events)",
            a.len(),
            b.len()
        )));
    }
    let (x, y) = (Authorizer::new(a)?, Authorizer::new(b)?);
    let ids = |es: Vec<crate::event::Event>| es.iter().map(|e| e.id()).collect::<Vec<_>>();
    if ids(x.caps()) != ids(y.caps()) {
        return Ok(Some("caps differ".into()));
    }
    if ids(x.values()) != ids(y.values()) {
        return Ok(Some("values differ".into()));
    }
    Ok(None)
}
