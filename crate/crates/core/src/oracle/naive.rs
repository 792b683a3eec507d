//! Reference evaluator: a direct, unmemoized transliteration of the
//! authorization predicate over plain sets, sharing no code with
//! [`crate::auth::Authorizer`] beyond the event types.
//!
//! Recursion carries the path of events under evaluation; re-entering one of
//! them yields "unknown", and an event whose value stays unknown is
//! unauthorized. This is the top-down counterpart of the memoized evaluator's
//! fixed-point iteration.

use std::collections::{HashMap, HashSet};

use crate::chronicle::GroupChronicle;
use crate::error::ChronicleError;
use crate::event::Event;
use crate::ids::{Capability, EventId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Tri {
    True,
    False,
    Unknown,
}

impl Tri {
    fn and(self, other: Tri) -> Tri {
        match (self, other) {
            (Tri::False, _) | (_, Tri::False) => Tri::False,
            (Tri::True, Tri::True) => Tri::True,
            _ => Tri::Unknown,
        }
    }

    fn not(self) -> Tri {
        match self {
            Tri::True => Tri::False,
            Tri::False => Tri::True,
            Tri::Unknown => Tri::Unknown,
        }
    }

    fn any(items: impl IntoIterator<Item = Tri>) -> Tri {
        let mut out = Tri::False;
        for t in items {
            match t {
                Tri::True => return Tri::True,
                Tri::Unknown => out = Tri::Unknown,
                Tri::False => {}
            }
        }
        out
    }

    fn from_bool(b: bool) -> Tri {
        if b {
            Tri::True
        } else {
            Tri::False
        }
    }
}

struct Naive<'a> {
    g: &'a GroupChronicle,
    creation: Event,
    /// Strict precursors of every member, by walking links.
    precursors: HashMap<EventId, HashSet<EventId>>,
}

impl<'a> Naive<'a> {
    fn new(g: &'a GroupChronicle) -> Result<Self, ChronicleError> {
        if !g.valid() {
            return Err(ChronicleError::Invalid);
        }
        let creation = g
            .iter()
            .find(|x| x.kind() == Capability::Create)
            .cloned()
            .ok_or(ChronicleError::Invalid)?;
        let precursors = g.iter().map(|e| (e.id(), Self::walk(g, e))).collect();
        Ok(Self {
            g,
            creation,
            precursors,
        })
    }

    fn walk(g: &GroupChronicle, e: &Event) -> HashSet<EventId> {
        let mut seen = HashSet::new();
        let mut stack: Vec<EventId> = e.direct_preds().iter().copied().collect();
        while let Some(id) = stack.pop() {
            if seen.insert(id) {
                if let Some(x) = g.get(&id) {
                    stack.extend(x.direct_preds().iter().copied());
                }
            }
        }
        seen
    }

    /// Whether `earlier` is reachable from `later` over predecessor links.
    fn before(&self, earlier: &EventId, later: &Event) -> bool {
        match self.precursors.get(&later.id()) {
            Some(p) => p.contains(earlier),
            None => Self::walk(self.g, later).contains(earlier),
        }
    }

    fn pre(&self, e: &Event) -> Vec<&Event> {
        self.g.iter().filter(|x| self.before(&x.id(), e)).collect()
    }

    fn pre_or_concurrent(&self, e: &Event) -> Vec<&Event> {
        self.g
            .iter()
            .filter(|x| x.id() != e.id() && !self.before(&e.id(), x))
            .collect()
    }

    fn eval(&self, e: &Event, path: &mut Vec<EventId>) -> Tri {
        if path.contains(&e.id()) {
            return Tri::Unknown;
        }
        if *e == self.creation {
            return Tri::True;
        }
        if self.g.contains(&e.id()) && self.before(&e.id(), &self.creation) {
            return Tri::True;
        }
        let voc = e.voc();
        let Some(claim) = voc.grnt() else {
            return Tri::False;
        };
        path.push(e.id());
        let pre = self.pre(e);
        let granted = Tri::any(
            pre.iter()
                .filter(|gr| {
                    gr.id() == claim
                        && gr
                            .voc()
                            .granted()
                            .is_some_and(|(cap, obj)| obj == voc.sbj() && cap == voc.kind())
                })
                .map(|gr| self.eval(gr, path)),
        );
        let target_ok = match voc.revoked() {
            Some(target) => pre
                .iter()
                .any(|gr| gr.id() == target && gr.kind() == Capability::Grant),
            None => true,
        };
        let result = if granted == Tri::False || !target_ok {
            Tri::False
        } else {
            let revoked = Tri::any(
                self.pre_or_concurrent(e)
                    .into_iter()
                    .filter(|rv| rv.voc().revoked() == Some(claim))
                    .map(|rv| self.eval(rv, path)),
            );
            granted.and(revoked.not()).and(Tri::from_bool(target_ok))
        };
        path.pop();
        result
    }
}

/// Discursive authorization of `e` by `g`, computed from first principles.
/// Exponential in the worst case; meant for chronicles of a few dozen events.
pub fn naive_authorizes(g: &GroupChronicle, e: &Event) -> Result<bool, ChronicleError> {
    let naive = Naive::new(g)?;
    if e.direct_preds().iter().any(|p| !g.contains(p)) {
        return Err(ChronicleError::DanglingTimestamp);
    }
    Ok(naive.eval(e, &mut Vec::new()) == Tri::True)
}

/// [`naive_authorizes`] for every member, in id order.
pub fn naive_verdicts(g: &GroupChronicle) -> Result<Vec<(EventId, bool)>, ChronicleError> {
    let naive = Naive::new(g)?;
    Ok(g.iter()
        .map(|e| (e.id(), naive.eval(e, &mut Vec::new()) == Tri::True))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auth::{authorizes, mk_revoke};
    use crate::event::make_event;
    use crate::fixtures::{self, entity};

    #[test]
    fn agrees_on_fixtures() {
        let f0 = fixtures::s0();
        let f1 = fixtures::s1();
        let f2 = fixtures::s2();
        let f3 = fixtures::s3();
        for g in [&f0.chronicle, &f1.chronicle, &f2.chronicle, &f3.chronicle] {
            for e in g.iter() {
                assert_eq!(
                    naive_authorizes(g, e).unwrap(),
                    authorizes(g, e).unwrap().authorized,
                    "{e:?}"
                );
            }
        }
        assert!(naive_authorizes(&f0.chronicle, &f0.c).unwrap());
    }

    #[test]
    fn revoked_revoker_is_unauthorized() {
        let f = fixtures::s1();
        let r1 = make_event(
            f.base.heads(),
            mk_revoke(entity("B"), f.g_b.id(), f.g_b.id()),
        );
        let r2 = make_event(
            f.base.heads(),
            mk_revoke(entity("B"), f.g_b.id(), f.g_c.id()),
        );
        // r2 claims g_b, which r1 revokes concurrently; r1 is not contested.
        let g = f.base.admit(r1.clone()).unwrap().admit(r2.clone()).unwrap();
        assert!(naive_authorizes(&g, &r1).unwrap());
        assert!(!naive_authorizes(&g, &r2).unwrap());
    }

    #[test]
    fn mutual_revocations_are_unauthorized() {
        let f = fixtures::s1();
        let r1 = make_event(
            f.base.heads(),
            mk_revoke(entity("B"), f.g_b.id(), f.g_b.id()),
        );
        let side = f
            .base
            .log(crate::auth::mk_assign(entity("C"), f.g_c.id(), "s"));
        let r2 = make_event(side.heads(), mk_revoke(entity("B"), f.g_b.id(), f.g_b.id()));
        let g = side.admit(r1.clone()).unwrap().admit(r2.clone()).unwrap();
        assert!(!naive_authorizes(&g, &r1).unwrap());
        assert!(!naive_authorizes(&g, &r2).unwrap());
    }
}
