//! Exhaustive small-instance enumeration: every chronicle reachable from a
//! preset by adding events drawn from a bounded invocation alphabet at every
//! downward-closed timestamp at or after creation.

use std::collections::HashSet;
use std::ops::ControlFlow;

use sha2::{Digest, Sha256};

use crate::auth::{mk_assign, mk_grant, mk_revoke};
use crate::chronicle::{CausalIndex, GroupChronicle};
use crate::event::{make_event, Event, Invocation};
use crate::ids::{Capability, EntityId, EventId};
use crate::oracle::downsets::{collect_downsets, creation_downset, frontier_of};
use crate::oracle::UNKNOWN_ID;
use crate::preset::{build_preset, follows_discipline, PolicyPreset, PresetKind};

pub const MAX_EXTRA_EVENTS: usize = 6;

/// The payload every enumerated assign carries.
pub const ENUM_NAME: &str = "n";

/// Invocations considered for each new event.
///
/// Claims range over the grants of the chronicle plus [`UNKNOWN_ID`]; a claim
/// naming any other existing event fails the same way an unknown one does.
/// Grants claim grant-conferring grants and confer the assign capability on
/// another participant. Revocations claim revoke-conferring grants (or the
/// unknown id) and target grants that do not confer the revoke capability
/// (or the unknown id).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet {
    pub entities: Vec<EntityId>,
    pub kinds: Vec<Capability>,
}

impl Alphabet {
    /// Assigns under every preset, grants under deny-grant-later and
    /// revocations under allow-revoke-later.
    pub fn for_preset(p: &PolicyPreset) -> Self {
        let kinds = match p.kind() {
            PresetKind::AllowOnCreation => vec![Capability::Assign],
            PresetKind::DenyGrantLater => vec![Capability::Assign, Capability::Grant],
            PresetKind::AllowRevokeLater => vec![Capability::Assign, Capability::Revoke],
        };
        Self {
            entities: p.participants().to_vec(),
            kinds,
        }
    }

    pub fn invocations(&self, g: &GroupChronicle) -> Vec<Invocation> {
        let grants: Vec<&Event> = g.iter().filter(|e| e.kind() == Capability::Grant).collect();
        let conferring = |cap: Capability| {
            grants
                .iter()
                .filter(move |e| e.voc().granted().is_some_and(|(c, _)| c == cap))
                .map(|e| e.id())
        };
        let grant_claims: Vec<EventId> = conferring(Capability::Grant).collect();
        let revoke_claims: Vec<EventId> = conferring(Capability::Revoke)
            .chain(std::iter::once(UNKNOWN_ID))
            .collect();
        let all_claims: Vec<EventId> = grants
            .iter()
            .map(|e| e.id())
            .chain(std::iter::once(UNKNOWN_ID))
            .collect();
        let targets: Vec<EventId> = grants
            .iter()
            .filter(|e| !matches!(e.voc().granted(), Some((Capability::Revoke, _))))
            .map(|e| e.id())
            .chain(std::iter::once(UNKNOWN_ID))
            .collect();
        let mut out = Vec::new();
        for s in &self.entities {
            for kind in &self.kinds {
                match kind {
                    Capability::Assign => {
                        for claim in &all_claims {
                            out.push(mk_assign(s.clone(), *claim, ENUM_NAME));
                        }
                    }
                    Capability::Grant => {
                        for claim in grant_claims.iter() {
                            for o in self.entities.iter().filter(|o| *o != s) {
                                out.push(mk_grant(
                                    s.clone(),
                                    Some(*claim),
                                    Capability::Assign,
                                    o.clone(),
                                ));
                            }
                        }
                    }
                    Capability::Revoke => {
                        for claim in &revoke_claims {
                            for t in &targets {
                                out.push(mk_revoke(s.clone(), *claim, *t));
                            }
                        }
                    }
                    Capability::Create => {}
                }
            }
        }
        debug_assert!(out.iter().all(|v| follows_discipline(g, v)));
        out
    }
}

/// One way of reaching `child`: `event` appended to `parent`. `first` is set
/// on the first time `child` is reached.
pub struct Extension<'a> {
    pub parent: &'a GroupChronicle,
    pub event: &'a Event,
    pub child: &'a GroupChronicle,
    pub first: bool,
}

/// Frontiers of every downset of `g` that contains the create event and its
/// precursors.
pub fn post_creation_frontiers(g: &GroupChronicle) -> Vec<std::collections::BTreeSet<EventId>> {
    let index = CausalIndex::new(g);
    let creation = g.creation().expect("enumerated chronicles are valid");
    let c = index.position(&creation.id()).expect("member");
    let required = creation_downset(&index, c);
    collect_downsets(&index, &required, usize::MAX)
        .expect("unbounded")
        .iter()
        .map(|set| frontier_of(&index, set))
        .collect()
}

fn id_set_digest(g: &GroupChronicle) -> [u8; 32] {
    let mut h = Sha256::new();
    for id in g.ids() {
        h.update(id.as_bytes());
    }
    h.finalize().into()
}

/// Visits every extension, level by level, of the preset by up to
/// `max_extra` events. Returns `Break` if the visitor stopped early.
///
/// # Panics
/// If `max_extra` exceeds [`MAX_EXTRA_EVENTS`].
pub fn for_each_extension<B>(
    preset: &PolicyPreset,
    max_extra: usize,
    mut visit: impl FnMut(Extension<'_>) -> ControlFlow<B>,
) -> ControlFlow<B> {
    assert!(
        max_extra <= MAX_EXTRA_EVENTS,
        "at most {MAX_EXTRA_EVENTS} extra events"
    );
    let alphabet = Alphabet::for_preset(preset);
    let mut level = vec![build_preset(preset)];
    for depth in 1..=max_extra {
        let mut seen: HashSet<[u8; 32]> = HashSet::new();
        let mut next = Vec::new();
        for parent in &level {
            let invocations = alphabet.invocations(parent);
            for frontier in post_creation_frontiers(parent) {
                for v in &invocations {
                    let e = make_event(frontier.clone(), v.clone());
                    if parent.contains(&e.id()) {
                        continue;
                    }
                    let child = parent.admit(e.clone()).expect("frontier is within parent");
                    let first = seen.insert(id_set_digest(&child));
                    visit(Extension {
                        parent,
                        event: &e,
                        child: &child,
                        first,
                    })?;
                    if first && depth < max_extra {
                        next.push(child);
                    }
                }
            }
        }
        level = next;
    }
    ControlFlow::Continue(())
}

/// Every distinct chronicle extending the preset by up to `max_extra` events,
/// the preset itself first.
pub fn enumerate_chronicles(preset: &PolicyPreset, max_extra: usize) -> Vec<GroupChronicle> {
    let mut out = vec![build_preset(preset)];
    let _ = for_each_extension::<()>(preset, max_extra, |x| {
        if x.first {
            out.push(x.child.clone());
        }
        ControlFlow::Continue(())
    });
    out
}

/// Extra events allowed for `preset` when chronicles are capped at `total`
/// events overall.
pub fn extra_budget(preset: &PolicyPreset, total: usize) -> usize {
    total
        .saturating_sub(build_preset(preset).len())
        .min(MAX_EXTRA_EVENTS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::entity;

    fn ab(kind: PresetKind) -> PolicyPreset {
        PolicyPreset::new(kind, vec![entity("A"), entity("B")]).unwrap()
    }

    #[test]
    fn zero_extra_is_the_preset() {
        let p = ab(PresetKind::AllowRevokeLater);
        assert_eq!(enumerate_chronicles(&p, 0), vec![build_preset(&p)]);
    }

    #[test]
    fn hand_count_for_allow_on_creation() {
        // Two subjects, each presenting g.assign.A, g.assign.B or the unknown
        // id, at the only post-creation timestamp.
        let p = ab(PresetKind::AllowOnCreation);
        assert_eq!(enumerate_chronicles(&p, 1).len(), 1 + 6);
    }

    #[test]
    fn enumerated_chronicles_are_valid_and_distinct() {
        let p = ab(PresetKind::AllowRevokeLater);
        let all = enumerate_chronicles(&p, 2);
        let ids: HashSet<Vec<EventId>> = all.iter().map(|g| g.ids().collect()).collect();
        assert_eq!(ids.len(), all.len());
        assert!(all.iter().all(GroupChronicle::valid));
    }

    #[test]
    fn alphabet_sizes() {
        let p = ab(PresetKind::AllowRevokeLater);
        let g = build_preset(&p);
        // Per subject: 4 assign claims, 2 revoke claims x 3 targets.
        assert_eq!(Alphabet::for_preset(&p).invocations(&g).len(), 2 * (4 + 6));
        let p = ab(PresetKind::DenyGrantLater);
        let g = build_preset(&p);
        // Per subject: 2 assign claims, and g.grant.A conferred on the other
        // participant.
        assert_eq!(Alphabet::for_preset(&p).invocations(&g).len(), 2 * (2 + 1));
    }
}
