use std::collections::BTreeSet;

use chronicap_core::fixtures::{s0, s1, s2, s3};
use chronicap_core::{authorizes, authorizes_precursive, caps, values, EventId, GroupChronicle};

fn ids(es: Vec<chronicap_core::Event>) -> BTreeSet<EventId> {
    es.iter().map(|e| e.id()).collect()
}

#[test]
fn s0_only_creator_grant_is_live() {
    let f = s0();
    assert_eq!(
        ids(caps(&f.chronicle).unwrap()),
        BTreeSet::from([f.g0.id()])
    );
    assert!(values(&f.chronicle).unwrap().is_empty());
}

#[test]
fn s1_concurrent_revocation_wins() {
    let f = s1();
    let g = &f.chronicle;
    assert!(!authorizes(g, &f.a).unwrap().authorized);
    assert!(authorizes(g, &f.rv).unwrap().authorized);
    assert!(values(g).unwrap().is_empty());
    assert_eq!(ids(caps(g).unwrap()), BTreeSet::from([f.g_b.id()]));
    // Before the branches meet, C's replica still sees its assign.
    assert!(authorizes(&f.branch_c, &f.a).unwrap().authorized);
    assert!(authorizes_precursive(g, &f.a).unwrap().authorized);
}

#[test]
fn s2_later_revocation_reauthorizes() {
    let f = s2();
    let g = &f.chronicle;
    assert!(!authorizes(g, &f.a).unwrap().authorized);
    assert!(authorizes(g, &f.b).unwrap().authorized);
    assert!(authorizes(g, &f.c2).unwrap().authorized);
    assert_eq!(ids(values(g).unwrap()), BTreeSet::from([f.b.id()]));
    assert_eq!(
        ids(caps(g).unwrap()),
        BTreeSet::from([f.g1.id(), f.g3.id()])
    );
}

#[test]
fn s3_backdated_assign_is_unauthorized() {
    let f = s3();
    let g = &f.chronicle;
    assert!(!authorizes(g, &f.backdated).unwrap().authorized);
    // Precursively it looked fine: the revocation is not in its history.
    assert!(authorizes_precursive(g, &f.backdated).unwrap().authorized);
    let without_rv: GroupChronicle = g
        .topological()
        .into_iter()
        .filter(|e| *e != f.s1.rv)
        .collect::<Result<_, _>>()
        .unwrap();
    assert!(authorizes(&without_rv, &f.backdated).unwrap().authorized);
}

#[test]
fn precursive_verdicts_survive_extension() {
    let f = s3();
    for e in f.s1.chronicle.iter() {
        assert_eq!(
            authorizes_precursive(&f.s1.chronicle, e).unwrap(),
            authorizes_precursive(&f.chronicle, e).unwrap()
        );
    }
}
