//! The three group policies: which setup grants precede the create event, and
//! which invocations participants construct afterwards.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::auth::{mk_create, mk_grant};
use crate::chronicle::GroupChronicle;
use crate::error::ChronicleError;
use crate::event::{make_event, Event, Invocation};
use crate::ids::{Capability, EntityId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PresetKind {
    /// Setup assign-grants for everyone; nothing can be granted or revoked later.
    AllowOnCreation,
    /// The creator alone may grant the assign capability after creation.
    DenyGrantLater,
    /// Setup assign-grants for everyone; the creator may revoke them later.
    AllowRevokeLater,
}

impl PresetKind {
    pub const ALL: [PresetKind; 3] = [
        PresetKind::AllowOnCreation,
        PresetKind::DenyGrantLater,
        PresetKind::AllowRevokeLater,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PresetKind::AllowOnCreation => "allow-on-creation",
            PresetKind::DenyGrantLater => "deny-grant-later",
            PresetKind::AllowRevokeLater => "allow-revoke-later",
        }
    }
}

impl fmt::Display for PresetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PresetKind::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| {
                format!(
                    "unknown preset {s:?} (expected allow-on-creation, deny-grant-later or allow-revoke-later)"
                )
            })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PolicyPreset {
    kind: PresetKind,
    participants: Vec<EntityId>,
}

impl PolicyPreset {
    /// `participants[0]` is the creator. The list must be non-empty and
    /// duplicate-free.
    pub fn new(kind: PresetKind, participants: Vec<EntityId>) -> Result<Self, String> {
        if participants.is_empty() {
            return Err("a preset needs at least one participant".into());
        }
        let distinct: BTreeSet<_> = participants.iter().collect();
        if distinct.len() != participants.len() {
            return Err("preset participants must be distinct".into());
        }
        Ok(Self { kind, participants })
    }

    pub fn kind(&self) -> PresetKind {
        self.kind
    }

    pub fn participants(&self) -> &[EntityId] {
        &self.participants
    }

    pub fn creator(&self) -> &EntityId {
        &self.participants[0]
    }

    /// Setup grants in logging order, with their labels.
    fn setup(&self) -> Vec<(String, Invocation)> {
        let creator = self.creator().clone();
        let assign_grants = || {
            self.participants.iter().map(|p| {
                (
                    format!("g.assign.{p}"),
                    mk_grant(creator.clone(), None, Capability::Assign, p.clone()),
                )
            })
        };
        match self.kind {
            PresetKind::AllowOnCreation => assign_grants().collect(),
            PresetKind::DenyGrantLater => vec![(
                format!("g.grant.{creator}"),
                mk_grant(creator.clone(), None, Capability::Grant, creator.clone()),
            )],
            PresetKind::AllowRevokeLater => assign_grants()
                .chain(std::iter::once((
                    format!("g.revoke.{creator}"),
                    mk_grant(creator.clone(), None, Capability::Revoke, creator.clone()),
                )))
                .collect(),
        }
    }
}

/// A freshly set-up group together with the labels of its setup events.
#[derive(Clone, Debug)]
pub struct SetupChronicle {
    pub chronicle: GroupChronicle,
    pub labels: BTreeMap<String, Event>,
}

impl SetupChronicle {
    pub fn label(&self, name: &str) -> Option<&Event> {
        self.labels.get(name)
    }
}

/// Chains setup grants (issued by the first participant) ahead of a create
/// event. The resulting chronicle is valid.
pub fn build_setup(
    creator: &EntityId,
    setup: impl IntoIterator<Item = (String, Invocation)>,
) -> Result<SetupChronicle, ChronicleError> {
    let mut g = GroupChronicle::new();
    let mut labels = BTreeMap::new();
    for (label, voc) in setup {
        let e = make_event(g.heads(), voc);
        g.insert(e.clone())?;
        labels.insert(label, e);
    }
    let c = make_event(g.heads(), mk_create(creator.clone()));
    g.insert(c.clone())?;
    labels.insert("create".to_owned(), c);
    Ok(SetupChronicle {
        chronicle: g,
        labels,
    })
}

pub fn build_preset_labeled(p: &PolicyPreset) -> SetupChronicle {
    build_setup(p.creator(), p.setup()).expect("setup events are chained")
}

pub fn build_preset(p: &PolicyPreset) -> GroupChronicle {
    build_preset_labeled(p).chronicle
}

/// Post-creation conventions that keep every preset inside the conflict
/// class where the only authorization race is between an assign and a
/// revocation: grants only ever confer the assign capability, and
/// revocations never target a grant that confers the revoke capability.
///
/// Generators and the enumerator only construct invocations this accepts.
pub fn follows_discipline(g: &GroupChronicle, v: &Invocation) -> bool {
    match v {
        Invocation::Create { .. } => false,
        Invocation::Grant { cap, .. } => *cap == Capability::Assign,
        Invocation::Revoke { obj, .. } => !matches!(
            g.get(obj).and_then(|t| t.voc().granted()),
            Some((Capability::Revoke, _))
        ),
        Invocation::Assign { .. } => true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auth::{caps, mk_grant, Authorizer};
    use crate::fixtures::entity;

    fn abc() -> Vec<EntityId> {
        vec![entity("A"), entity("B"), entity("C")]
    }

    #[test]
    fn presets_are_valid() {
        for kind in PresetKind::ALL {
            let g = build_preset(&PolicyPreset::new(kind, abc()).unwrap());
            assert!(g.valid(), "{kind}");
        }
    }

    #[test]
    fn allow_revoke_later_starts_with_four_caps() {
        let g = build_preset(&PolicyPreset::new(PresetKind::AllowRevokeLater, abc()).unwrap());
        assert_eq!(caps(&g).unwrap().len(), 4);
    }

    #[test]
    fn allow_on_creation_never_authorizes_grants() {
        let p = PolicyPreset::new(PresetKind::AllowOnCreation, abc()).unwrap();
        let setup = build_preset_labeled(&p);
        let g = &setup.chronicle;
        assert!(g.iter().all(|e| e
            .voc()
            .granted()
            .map_or(true, |(c, _)| c == Capability::Assign)));
        for claim in g.ids() {
            let attempt = g.log(mk_grant(
                entity("A"),
                Some(claim),
                Capability::Assign,
                entity("B"),
            ));
            let auth = Authorizer::new(&attempt).unwrap();
            let verdicts = auth.all_verdicts();
            let grant = verdicts
                .iter()
                .find(|(e, _)| e.voc().grnt() == Some(claim) && e.kind() == Capability::Grant)
                .unwrap();
            assert!(!grant.1.authorized);
        }
    }

    #[test]
    fn preset_validation() {
        assert!(PolicyPreset::new(PresetKind::AllowOnCreation, vec![]).is_err());
        assert!(
            PolicyPreset::new(PresetKind::AllowOnCreation, vec![entity("A"), entity("A")]).is_err()
        );
        assert_eq!(
            "deny-grant-later".parse::<PresetKind>().unwrap(),
            PresetKind::DenyGrantLater
        );
        assert!("nope".parse::<PresetKind>().is_err());
    }

    #[test]
    fn labels_name_setup_events() {
        let p = PolicyPreset::new(PresetKind::AllowRevokeLater, abc()).unwrap();
        let s = build_preset_labeled(&p);
        assert_eq!(s.labels.len(), 5);
        assert_eq!(s.label("create").unwrap().kind(), Capability::Create);
        assert_eq!(
            s.label("g.revoke.A").unwrap().voc().granted(),
            Some((Capability::Revoke, &entity("A")))
        );
    }
}
