//! Small hand-built chronicles exercising the interesting authorization
//! cases. Setup grants are issued by the creator `A` and chained before the
//! create event.
//!
//! * `S0`: one setup assign-grant to `A`, then the create event.
//! * `S1`: `C` may assign, `B` may revoke; `B` revokes `C`'s grant while `C`
//!   concurrently assigns.
//! * `S2`: a revocation concurrent to an assign is itself revoked by a later
//!   revocation that succeeds the assign, re-authorizing the assign.
//! * `S3`: `S1` plus a second assign by `C` backdated to exclude the
//!   revocation from its history.

use std::collections::BTreeSet;

use crate::auth::{mk_assign, mk_create, mk_grant, mk_revoke};
use crate::chronicle::GroupChronicle;
use crate::event::{make_event, Event};
use crate::ids::{Capability, EntityId};

pub fn entity(name: &str) -> EntityId {
    EntityId::new(name).expect("fixture entity names are valid")
}

fn after(events: &[&Event]) -> BTreeSet<crate::ids::EventId> {
    events.iter().map(|e| e.id()).collect()
}

fn build(events: &[&Event]) -> GroupChronicle {
    let mut g = GroupChronicle::new();
    for e in events {
        g.insert((*e).clone())
            .expect("fixture events are listed in causal order");
    }
    g
}

#[derive(Clone, Debug)]
pub struct S0 {
    pub g0: Event,
    pub c: Event,
    pub chronicle: GroupChronicle,
}

pub fn s0() -> S0 {
    let a = entity("A");
    let g0 = make_event(
        BTreeSet::new(),
        mk_grant(a.clone(), None, Capability::Assign, a.clone()),
    );
    let c = make_event(after(&[&g0]), mk_create(a));
    let chronicle = build(&[&g0, &c]);
    S0 { g0, c, chronicle }
}

#[derive(Clone, Debug)]
pub struct S1 {
    pub g_c: Event,
    pub g_b: Event,
    pub c: Event,
    pub rv: Event,
    pub a: Event,
    /// Setup and create only.
    pub base: GroupChronicle,
    /// `B`'s branch: base plus `rv`.
    pub branch_b: GroupChronicle,
    /// `C`'s branch: base plus `a`.
    pub branch_c: GroupChronicle,
    /// Join of both branches.
    pub chronicle: GroupChronicle,
}

pub fn s1() -> S1 {
    let (ea, eb, ec) = (entity("A"), entity("B"), entity("C"));
    let g_c = make_event(
        BTreeSet::new(),
        mk_grant(ea.clone(), None, Capability::Assign, ec.clone()),
    );
    let g_b = make_event(
        after(&[&g_c]),
        mk_grant(ea.clone(), None, Capability::Revoke, eb.clone()),
    );
    let c = make_event(after(&[&g_b]), mk_create(ea));
    let base = build(&[&g_c, &g_b, &c]);
    let branch_b = base.log(mk_revoke(eb, g_b.id(), g_c.id()));
    let branch_c = base.log(mk_assign(ec, g_c.id(), "x"));
    let rv = make_event(after(&[&c]), mk_revoke(entity("B"), g_b.id(), g_c.id()));
    let a = make_event(after(&[&c]), mk_assign(entity("C"), g_c.id(), "x"));
    let chronicle = branch_b.join(&branch_c);
    S1 {
        g_c,
        g_b,
        c,
        rv,
        a,
        base,
        branch_b,
        branch_c,
        chronicle,
    }
}

#[derive(Clone, Debug)]
pub struct S2 {
    pub g1: Event,
    pub g2: Event,
    pub g3: Event,
    pub c: Event,
    pub b: Event,
    pub a: Event,
    pub c2: Event,
    pub chronicle: GroupChronicle,
}

pub fn s2() -> S2 {
    let (ea, eb, ec, ed) = (entity("A"), entity("B"), entity("C"), entity("D"));
    let g1 = make_event(
        BTreeSet::new(),
        mk_grant(ea.clone(), None, Capability::Assign, ec.clone()),
    );
    let g2 = make_event(
        after(&[&g1]),
        mk_grant(ea.clone(), None, Capability::Revoke, eb.clone()),
    );
    let g3 = make_event(
        after(&[&g2]),
        mk_grant(ea.clone(), None, Capability::Revoke, ed.clone()),
    );
    let c = make_event(after(&[&g3]), mk_create(ea));
    let b = make_event(after(&[&c]), mk_assign(ec, g1.id(), "y"));
    let a = make_event(after(&[&c]), mk_revoke(eb, g2.id(), g1.id()));
    let c2 = make_event(after(&[&b]), mk_revoke(ed, g3.id(), g2.id()));
    let chronicle = build(&[&g1, &g2, &g3, &c, &b, &a, &c2]);
    S2 {
        g1,
        g2,
        g3,
        c,
        b,
        a,
        c2,
        chronicle,
    }
}

#[derive(Clone, Debug)]
pub struct S3 {
    pub s1: S1,
    /// `C`'s assign whose predecessors exclude `rv`.
    pub backdated: Event,
    pub chronicle: GroupChronicle,
}

pub fn s3() -> S3 {
    let s1 = s1();
    let backdated = make_event(after(&[&s1.a]), mk_assign(entity("C"), s1.g_c.id(), "z"));
    let chronicle = s1
        .chronicle
        .admit(backdated.clone())
        .expect("predecessor present");
    S3 {
        s1,
        backdated,
        chronicle,
    }
}

/// Every event of every fixture, in fixture order (duplicates included).
pub fn all_fixture_events() -> Vec<(String, Event)> {
    let f0 = s0();
    let f1 = s1();
    let f2 = s2();
    let f3 = s3();
    vec![
        ("s0.g0".into(), f0.g0),
        ("s0.c".into(), f0.c),
        ("s1.g_c".into(), f1.g_c),
        ("s1.g_b".into(), f1.g_b),
        ("s1.c".into(), f1.c),
        ("s1.rv".into(), f1.rv),
        ("s1.a".into(), f1.a),
        ("s2.g1".into(), f2.g1),
        ("s2.g2".into(), f2.g2),
        ("s2.g3".into(), f2.g3),
        ("s2.c".into(), f2.c),
        ("s2.b".into(), f2.b),
        ("s2.a".into(), f2.a),
        ("s2.c2".into(), f2.c2),
        ("s3.backdated".into(), f3.backdated),
    ]
}
