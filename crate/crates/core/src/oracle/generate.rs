//! Seeded random chronicles. Honest entities log truthful invocations at the
//! current frontier; Byzantine entities forge claims, backdate and
//! equivocate.

use std::collections::BTreeSet;

use fixedbitset::FixedBitSet;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::auth::{mk_assign, mk_grant, mk_revoke, Authorizer};
use crate::chronicle::{CausalIndex, GroupChronicle};
use crate::event::{make_event, Event, Invocation};
use crate::ids::{Capability, EntityId, EventId};
use crate::oracle::downsets::{creation_downset, frontier_of, sample_downset};
use crate::oracle::UNKNOWN_ID;
use crate::preset::{build_preset, follows_discipline, PolicyPreset};

pub const MAX_GENERATED_EVENTS: usize = 16;

const NAMES: [&str; 4] = ["x", "y", "z", "w"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenConfig {
    /// Upper bound on events added after the preset's setup.
    pub max_events: usize,
    pub entities: Vec<EntityId>,
    pub preset: PolicyPreset,
    pub byz_entities: Vec<EntityId>,
    pub allow_backdating: bool,
    pub allow_equivocation: bool,
    pub seed: u64,
}

impl GenConfig {
    /// Honest-only configuration over the preset's participants.
    pub fn new(preset: PolicyPreset, seed: u64) -> Self {
        Self {
            max_events: MAX_GENERATED_EVENTS,
            entities: preset.participants().to_vec(),
            preset,
            byz_entities: Vec::new(),
            allow_backdating: false,
            allow_equivocation: false,
            seed,
        }
    }

    /// Marks `byz` as Byzantine with every attack enabled.
    pub fn with_byzantine(mut self, byz: impl IntoIterator<Item = EntityId>) -> Self {
        self.byz_entities = byz.into_iter().collect();
        self.allow_backdating = true;
        self.allow_equivocation = true;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_events > MAX_GENERATED_EVENTS {
            return Err(format!("max_events must be at most {MAX_GENERATED_EVENTS}"));
        }
        if self.entities.is_empty() {
            return Err("at least one entity is required".into());
        }
        if let Some(b) = self
            .byz_entities
            .iter()
            .find(|b| !self.entities.contains(b))
        {
            return Err(format!("Byzantine entity {b} is not an entity"));
        }
        let byz: BTreeSet<_> = self.byz_entities.iter().collect();
        let all: BTreeSet<_> = self.entities.iter().collect();
        if byz.len() >= all.len() {
            return Err("Byzantine entities must be a strict subset of the entities".into());
        }
        Ok(())
    }
}

/// One generation step: the event, the chronicle frontier when it was
/// generated, and who generated it.
#[derive(Clone, Debug)]
pub struct GenStep {
    pub event: Event,
    pub frontier: BTreeSet<EventId>,
    pub author: EntityId,
    pub byzantine: bool,
}

#[derive(Clone, Debug)]
pub struct Generated {
    pub setup: GroupChronicle,
    pub chronicle: GroupChronicle,
    pub steps: Vec<GenStep>,
}

pub fn gen_chronicle(cfg: &GenConfig) -> GroupChronicle {
    gen_traced(cfg).chronicle
}

/// Like [`gen_chronicle`], keeping the sequence of added events.
///
/// # Panics
/// If `cfg` fails [`GenConfig::validate`].
pub fn gen_traced(cfg: &GenConfig) -> Generated {
    if let Err(e) = cfg.validate() {
        panic!("invalid generator config: {e}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let setup = build_preset(&cfg.preset);
    let mut g = setup.clone();
    let mut steps = Vec::new();
    let target = if cfg.max_events == 0 {
        0
    } else {
        rng.gen_range(1..=cfg.max_events)
    };
    let mut attempts = 0;
    while steps.len() < target && attempts < 8 * target {
        attempts += 1;
        let author = cfg.entities.choose(&mut rng).expect("non-empty").clone();
        let frontier = g.heads();
        let mut fresh = Vec::new();
        let byzantine = cfg.byz_entities.contains(&author);
        if !byzantine {
            let options = honest_options(&g, &author, &cfg.entities, &mut rng);
            if let Some(v) = options.choose(&mut rng) {
                fresh.push(make_event(frontier.clone(), v.clone()));
            }
        } else {
            let preds = if cfg.allow_backdating && rng.gen_bool(0.5) {
                backdated_frontier(&g, &mut rng)
            } else {
                frontier.clone()
            };
            let v = forged_invocation(&g, &author, &cfg.entities, &mut rng);
            fresh.push(make_event(preds.clone(), v));
            if cfg.allow_equivocation && steps.len() + 1 < target && rng.gen_bool(0.3) {
                let v2 = forged_invocation(&g, &author, &cfg.entities, &mut rng);
                fresh.push(make_event(preds, v2));
            }
        }
        for e in fresh {
            if g.insert(e.clone()).expect("predecessors are members") {
                steps.push(GenStep {
                    event: e,
                    frontier: frontier.clone(),
                    author: author.clone(),
                    byzantine,
                });
            }
        }
    }
    Generated {
        setup,
        chronicle: g,
        steps,
    }
}

/// Invocations `sbj` can truthfully make at the frontier of `g`: each presents
/// a live capability granted to `sbj`.
pub(crate) fn honest_options(
    g: &GroupChronicle,
    sbj: &EntityId,
    entities: &[EntityId],
    rng: &mut impl Rng,
) -> Vec<Invocation> {
    let auth = Authorizer::new(g).expect("generated chronicles are valid");
    let live = auth.caps();
    let assign_grants: Vec<&Event> = live
        .iter()
        .filter(|gr| matches!(gr.voc().granted(), Some((Capability::Assign, _))))
        .collect();
    let mut out = Vec::new();
    for gr in &live {
        let Some((cap, obj)) = gr.voc().granted() else {
            continue;
        };
        if obj != sbj {
            continue;
        }
        match cap {
            Capability::Assign => {
                let name = NAMES.choose(rng).expect("non-empty");
                out.push(mk_assign(sbj.clone(), gr.id(), *name));
            }
            Capability::Grant => {
                for o in entities {
                    out.push(mk_grant(
                        sbj.clone(),
                        Some(gr.id()),
                        Capability::Assign,
                        o.clone(),
                    ));
                }
            }
            Capability::Revoke => {
                for t in &assign_grants {
                    out.push(mk_revoke(sbj.clone(), gr.id(), t.id()));
                }
            }
            Capability::Create => {}
        }
    }
    out
}

/// Frontier of a random downset that contains the create event.
pub(crate) fn backdated_frontier(g: &GroupChronicle, rng: &mut impl Rng) -> BTreeSet<EventId> {
    let index = CausalIndex::new(g);
    let creation = g.creation().expect("generated chronicles are valid");
    let c = index.position(&creation.id()).expect("member");
    let required: FixedBitSet = creation_downset(&index, c);
    let set = sample_downset(&index, &required, rng);
    frontier_of(&index, &set)
}

/// An arbitrary constructible invocation by `sbj`: claims and targets are
/// existing ids or [`UNKNOWN_ID`], within the preset discipline.
pub(crate) fn forged_invocation(
    g: &GroupChronicle,
    sbj: &EntityId,
    entities: &[EntityId],
    rng: &mut impl Rng,
) -> Invocation {
    let ids: Vec<EventId> = g.ids().collect();
    let grants: Vec<EventId> = g
        .iter()
        .filter(|e| e.kind() == Capability::Grant)
        .map(Event::id)
        .collect();
    let pick_claim = |rng: &mut ChaCha8Rng| -> EventId {
        match rng.gen_range(0..20) {
            0..=11 => *grants.choose(rng).expect("presets have setup grants"),
            12..=16 => *ids.choose(rng).expect("non-empty"),
            _ => UNKNOWN_ID,
        }
    };
    let mut local = ChaCha8Rng::seed_from_u64(rng.gen());
    loop {
        let v = match local.gen_range(0..10) {
            0..=4 => mk_assign(
                sbj.clone(),
                pick_claim(&mut local),
                *NAMES.choose(&mut local).expect("non-empty"),
            ),
            5..=6 => mk_grant(
                sbj.clone(),
                Some(pick_claim(&mut local)),
                Capability::Assign,
                entities.choose(&mut local).expect("non-empty").clone(),
            ),
            _ => {
                let target = match local.gen_range(0..10) {
                    0..=6 => *grants.choose(&mut local).expect("non-empty"),
                    7..=8 => *ids.choose(&mut local).expect("non-empty"),
                    _ => UNKNOWN_ID,
                };
                mk_revoke(sbj.clone(), pick_claim(&mut local), target)
            }
        };
        if follows_discipline(g, &v) {
            return v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::encode_chronicle;
    use crate::fixtures::entity;
    use crate::preset::PresetKind;

    fn preset(kind: PresetKind) -> PolicyPreset {
        PolicyPreset::new(kind, vec![entity("A"), entity("B"), entity("C")]).unwrap()
    }

    #[test]
    fn generated_chronicles_are_valid_and_bounded() {
        for kind in PresetKind::ALL {
            for seed in 0..50 {
                let cfg = GenConfig::new(preset(kind), seed).with_byzantine([entity("B")]);
                let out = gen_traced(&cfg);
                assert!(out.chronicle.valid());
                assert!(out.steps.len() <= cfg.max_events);
                assert_eq!(out.chronicle.len(), out.setup.len() + out.steps.len());
            }
        }
    }

    #[test]
    fn honest_entities_log_at_the_frontier() {
        for kind in PresetKind::ALL {
            for seed in 0..30 {
                let out = gen_traced(&GenConfig::new(preset(kind), seed));
                for s in &out.steps {
                    assert!(!s.byzantine);
                    assert_eq!(s.event.direct_preds(), &s.frontier);
                    assert_eq!(s.event.voc().sbj(), &s.author);
                }
            }
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let cfg =
            GenConfig::new(preset(PresetKind::AllowRevokeLater), 42).with_byzantine([entity("C")]);
        assert_eq!(
            encode_chronicle(&gen_chronicle(&cfg)),
            encode_chronicle(&gen_chronicle(&cfg))
        );
    }

    #[test]
    fn backdating_shows_up_in_a_seed_sweep() {
        let found = (0..200).any(|seed| {
            let mut cfg = GenConfig::new(preset(PresetKind::AllowRevokeLater), seed);
            cfg.byz_entities = vec![entity("B")];
            cfg.allow_backdating = true;
            let out = gen_traced(&cfg);
            out.steps.iter().any(|s| {
                let t = out
                    .chronicle
                    .closure(s.event.direct_preds().iter().copied());
                let now = out.chronicle.closure(s.frontier.iter().copied());
                t.is_subset(&now) && t.len() < now.len()
            })
        });
        assert!(found);
    }

    #[test]
    fn config_validation() {
        let p = preset(PresetKind::AllowOnCreation);
        assert!(GenConfig::new(p.clone(), 0).validate().is_ok());
        let all_byz =
            GenConfig::new(p.clone(), 0).with_byzantine([entity("A"), entity("B"), entity("C")]);
        assert!(all_byz.validate().is_err());
        let mut big = GenConfig::new(p, 0);
        big.max_events = 17;
        assert!(big.validate().is_err());
    }
}
