//! Checkers for the three safety invariants and for agreement between the
//! memoized and reference evaluators.

use std::borrow::Cow;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::auth::{authorizes, authorizes_precursive, AuthVerdict, Authorizer, RevocationScope};
use crate::chronicle::{GroupChronicle, Timestamp};
use crate::error::ChronicleError;
use crate::event::{encode_event, make_event, Event, Invocation};
use crate::ids::{Capability, EventId};
use crate::oracle::downsets::{collect_downsets, frontier_of, sample_downset};
use crate::oracle::naive::naive_verdicts;
use fixedbitset::FixedBitSet;

/// Timestamps are enumerated exhaustively up to this many downsets.
pub const EXHAUSTIVE_DOWNSETS: usize = 4096;
/// Otherwise this many are sampled.
pub const SAMPLED_DOWNSETS: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Invariant {
    AuthorizationSafety,
    QuerySafety,
    RevocationSafety,
    Convergence,
    OracleMismatch,
}

impl Invariant {
    pub const ALL: [Invariant; 5] = [
        Invariant::AuthorizationSafety,
        Invariant::QuerySafety,
        Invariant::RevocationSafety,
        Invariant::Convergence,
        Invariant::OracleMismatch,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Invariant::AuthorizationSafety => "authorization-safety",
            Invariant::QuerySafety => "query-safety",
            Invariant::RevocationSafety => "revocation-safety",
            Invariant::Convergence => "convergence",
            Invariant::OracleMismatch => "oracle-mismatch",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|i| i.as_str() == s)
    }
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A falsified invariant with enough context to replay it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub invariant: Invariant,
    /// The chronicle the checker was run on (`G`, before any extension).
    pub chronicle: GroupChronicle,
    /// The extending event, the hypothetical event at the witnessing
    /// timestamp, or the member on which evaluators disagree.
    pub event: Option<Event>,
    pub invocation: Option<Invocation>,
    pub timestamp: Option<Timestamp>,
    /// Second replica's chronicle, for convergence failures.
    pub other: Option<GroupChronicle>,
    /// Evaluator under test, for revocation-safety runs against a mutant.
    pub scope: RevocationScope,
    pub detail: String,
}

impl Violation {
    pub fn new(invariant: Invariant, chronicle: GroupChronicle, detail: impl Into<String>) -> Self {
        Self {
            invariant,
            chronicle,
            event: None,
            invocation: None,
            timestamp: None,
            other: None,
            scope: RevocationScope::default(),
            detail: detail.into(),
        }
    }

    fn with_event(mut self, e: &Event) -> Self {
        self.event = Some(e.clone());
        self
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} violated: {}", self.invariant, self.detail)?;
        if let Some(e) = &self.event {
            write!(f, " [event {} {}]", e.id().short(), e.voc())?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CheckError {
    #[error("precondition violated: {0}")]
    PreconditionViolated(#[from] ChronicleError),
}

fn verdict_pair(a: AuthVerdict, b: AuthVerdict) -> String {
    format!("{} before, {} after", a.reason, b.reason)
}

/// A chronicle evaluated once: its authorizer and the precursive verdict of
/// every member.
#[derive(Clone, Debug)]
pub struct Evaluated {
    pub g: GroupChronicle,
    pub auth: Authorizer,
    precursive: Vec<AuthVerdict>,
}

impl Evaluated {
    pub fn new(g: &GroupChronicle) -> Result<Self, CheckError> {
        let auth = Authorizer::new(g)?;
        let precursive = (0..auth.index().len())
            .map(|i| auth.precursive_verdict(i))
            .collect();
        Ok(Self {
            g: g.clone(),
            auth,
            precursive,
        })
    }

    pub fn precursive_of(&self, id: &EventId) -> AuthVerdict {
        self.precursive[self.auth.index().position(id).expect("member")]
    }
}

/// A chronicle `G`, an admissible event `e_m` and `G′ = G ∪ {e_m}`, with
/// both evaluated once. The extension checkers share this.
pub struct Extended<'a> {
    before: Cow<'a, Evaluated>,
    e_m: Event,
    after: Evaluated,
}

impl Extended<'static> {
    /// Checks the preconditions: `G` valid, `e_m`'s predecessors in `G`, and
    /// `G′` valid.
    pub fn new(g: &GroupChronicle, e_m: &Event) -> Result<Self, CheckError> {
        let before = Evaluated::new(g)?;
        Extended::build(Cow::Owned(before), e_m)
    }
}

impl<'a> Extended<'a> {
    /// Like [`Extended::new`], reusing an evaluation of `G`.
    pub fn from_evaluated(before: &'a Evaluated, e_m: &Event) -> Result<Self, CheckError> {
        Self::build(Cow::Borrowed(before), e_m)
    }

    fn build(before: Cow<'a, Evaluated>, e_m: &Event) -> Result<Self, CheckError> {
        if e_m.direct_preds().iter().any(|p| !before.g.contains(p)) {
            return Err(ChronicleError::DanglingTimestamp.into());
        }
        let after = Evaluated::new(&before.g.admit(e_m.clone())?)?;
        Ok(Self {
            before,
            e_m: e_m.clone(),
            after,
        })
    }

    /// The evaluation of `G′`.
    pub fn into_after(self) -> Evaluated {
        self.after
    }

    fn violation(&self, invariant: Invariant, detail: String) -> Violation {
        Violation::new(invariant, self.before.g.clone(), detail).with_event(&self.e_m)
    }

    /// Both conjuncts: every precursive verdict of `G` survives the
    /// extension, and so does every discursive verdict unless `e_m` is an
    /// authorized revocation.
    pub fn authorization_safety(&self) -> Option<Violation> {
        for e in self.before.g.iter() {
            let before = self.before.precursive_of(&e.id());
            let after = self.after.precursive_of(&e.id());
            if before.authorized != after.authorized {
                let detail = format!(
                    "precursive verdict of {} changed ({})",
                    e.id().short(),
                    verdict_pair(before, after)
                );
                return Some(self.violation(Invariant::AuthorizationSafety, detail));
            }
        }
        let (a1, a2) = (&self.before.auth, &self.after.auth);
        let m = a2.verdict_of(&self.e_m.id()).expect("member");
        if self.e_m.kind() == Capability::Revoke && m.authorized {
            return None;
        }
        for e in self.before.g.iter() {
            let before = a1.verdict_of(&e.id()).expect("member");
            let after = a2.verdict_of(&e.id()).expect("member");
            if before.authorized != after.authorized {
                let detail = format!(
                    "discursive verdict of {} changed ({}) though the new event is {}",
                    e.id().short(),
                    verdict_pair(before, after),
                    m.reason
                );
                return Some(self.violation(Invariant::AuthorizationSafety, detail));
            }
        }
        None
    }

    /// If `e_m` changes `caps` or `values`, it must be authorized by `G`.
    pub fn query_safety(&self) -> Option<Violation> {
        let (a1, a2) = (&self.before.auth, &self.after.auth);
        let verdict = self.verdict_in_g();
        if verdict.authorized {
            return None;
        }
        for (query, before, after) in [
            ("caps", id_set(&a1.caps()), id_set(&a2.caps())),
            ("values", id_set(&a1.values()), id_set(&a2.values())),
        ] {
            if before != after {
                let detail = format!(
                    "{query} changed although the new event is {}",
                    verdict.reason
                );
                return Some(self.violation(Invariant::QuerySafety, detail));
            }
        }
        None
    }

    /// Verdict on `e_m` as a hypothetical event of `G`.
    pub fn verdict_in_g(&self) -> AuthVerdict {
        self.before
            .auth
            .evaluate(&self.e_m)
            .expect("predecessors checked")
    }

    /// Verdict on `e_m` as a member of `G′`.
    pub fn verdict_in_g2(&self) -> AuthVerdict {
        self.after.auth.verdict_of(&self.e_m.id()).expect("member")
    }

    /// Query safety's consequent read on `G′` instead of `G`; the two
    /// readings must agree.
    pub fn consequent_agreement(&self) -> Option<Violation> {
        let (on_g, on_g2) = (self.verdict_in_g(), self.verdict_in_g2());
        (on_g.authorized != on_g2.authorized).then(|| {
            let detail = format!(
                "new event is {} as a hypothetical event but {} as a member",
                on_g.reason, on_g2.reason
            );
            self.violation(Invariant::QuerySafety, detail)
        })
    }
}

pub fn check_authorization_safety(
    g: &GroupChronicle,
    e_m: &Event,
) -> Result<Option<Violation>, CheckError> {
    Ok(Extended::new(g, e_m)?.authorization_safety())
}

fn id_set(events: &[Event]) -> Vec<EventId> {
    events.iter().map(Event::id).collect()
}

pub fn check_query_safety(
    g: &GroupChronicle,
    e_m: &Event,
) -> Result<Option<Violation>, CheckError> {
    Ok(Extended::new(g, e_m)?.query_safety())
}

/// The verdict on `e_m` as a hypothetical event of `G` and as a member of
/// `G ∪ {e_m}`, through the public entry point.
pub fn query_safety_verdicts(
    g: &GroupChronicle,
    e_m: &Event,
) -> Result<(AuthVerdict, AuthVerdict), CheckError> {
    let g2 = g.admit(e_m.clone())?;
    Ok((authorizes(g, e_m)?, authorizes(&g2, e_m)?))
}

pub fn check_revocation_safety(
    g: &GroupChronicle,
    v: &Invocation,
) -> Result<Option<Violation>, CheckError> {
    check_revocation_safety_with(g, v, RevocationScope::default())
}

pub fn check_revocation_safety_with(
    g: &GroupChronicle,
    v: &Invocation,
    scope: RevocationScope,
) -> Result<Option<Violation>, CheckError> {
    check_revocation_safety_all(g, std::slice::from_ref(v), scope)
}

/// For each invocation `v`: if `v` logged at `now(G)` is unauthorized, it
/// must be unauthorized at every downward-closed `T ⊆ now(G)`. Reports the
/// first failure, by invocation order then timestamp order.
///
/// Timestamps at which `v` reproduces an existing member are skipped: that
/// event is already part of `G`, so re-issuing it is a replay rather than a
/// backdated attempt, and its member verdict ignores its own successors.
pub fn check_revocation_safety_all(
    g: &GroupChronicle,
    vs: &[Invocation],
    scope: RevocationScope,
) -> Result<Option<Violation>, CheckError> {
    let auth = Authorizer::with_scope(g, scope)?;
    Ok(revocation_safety_on(g, &auth, vs))
}

/// [`check_revocation_safety_all`] with the correct evaluator, reusing an
/// evaluation of `G`.
pub fn check_revocation_safety_evaluated(ev: &Evaluated, vs: &[Invocation]) -> Option<Violation> {
    revocation_safety_on(&ev.g, &ev.auth, vs)
}

fn revocation_safety_on(
    g: &GroupChronicle,
    auth: &Authorizer,
    vs: &[Invocation],
) -> Option<Violation> {
    let scope = auth.scope();
    let index = auth.index();
    let mut now = FixedBitSet::with_capacity(index.len());
    now.insert_range(..);
    let none = FixedBitSet::with_capacity(index.len());
    let mut exhaustive: Option<Option<Vec<FixedBitSet>>> = None;
    for v in vs {
        if auth.evaluate_at(v, &now).authorized {
            continue;
        }
        let sampled: Vec<FixedBitSet>;
        let timestamps: &[FixedBitSet] = match exhaustive
            .get_or_insert_with(|| collect_downsets(index, &none, EXHAUSTIVE_DOWNSETS))
        {
            Some(all) => all,
            None => {
                let mut rng = ChaCha8Rng::from_seed(sampling_seed(g, v));
                sampled = (0..SAMPLED_DOWNSETS)
                    .map(|_| sample_downset(index, &none, &mut rng))
                    .collect();
                &sampled
            }
        };
        let replays: Vec<usize> = (0..index.len())
            .filter(|&i| index.event(i).voc() == v)
            .collect();
        for t in timestamps.iter() {
            if replays.iter().any(|&i| index.ancestors(i) == t) {
                continue;
            }
            let verdict = auth.evaluate_at(v, t);
            if verdict.authorized {
                let ts = Timestamp::from_ids(t.ones().map(|i| index.event(i).id()));
                let detail = format!(
                    "unauthorized at now but {} at a timestamp of {} events",
                    verdict.reason,
                    ts.len()
                );
                let e = make_event(frontier_of(index, t), v.clone());
                let mut out =
                    Violation::new(Invariant::RevocationSafety, g.clone(), detail).with_event(&e);
                out.invocation = Some(v.clone());
                out.timestamp = Some(ts);
                out.scope = scope;
                return Some(out);
            }
        }
    }
    None
}

/// Seed for timestamp sampling, fixed by the chronicle and the invocation so
/// the checker stays a pure function.
fn sampling_seed(g: &GroupChronicle, v: &Invocation) -> [u8; 32] {
    let mut h = Sha256::new();
    for id in g.ids() {
        h.update(id.as_bytes());
    }
    h.update(encode_event(&make_event(Default::default(), v.clone())));
    h.finalize().into()
}

/// The memoized and the reference evaluator agree on every member.
pub fn check_oracle_equivalence(g: &GroupChronicle) -> Result<Option<Violation>, CheckError> {
    oracle_equivalence_on(g, &Authorizer::new(g)?)
}

/// [`check_oracle_equivalence`], reusing an evaluation of `G`.
pub fn check_oracle_equivalence_evaluated(ev: &Evaluated) -> Result<Option<Violation>, CheckError> {
    oracle_equivalence_on(&ev.g, &ev.auth)
}

fn oracle_equivalence_on(
    g: &GroupChronicle,
    auth: &Authorizer,
) -> Result<Option<Violation>, CheckError> {
    for (id, slow) in naive_verdicts(g)? {
        let fast = auth.verdict_of(&id).expect("member");
        if fast.authorized != slow {
            let detail = format!(
                "memoized evaluator says {}, reference says {slow}",
                fast.reason
            );
            let e = g.get(&id).expect("member");
            return Ok(Some(
                Violation::new(Invariant::OracleMismatch, g.clone(), detail).with_event(e),
            ));
        }
    }
    Ok(None)
}

/// The precursive verdicts the checkers use agree with
/// [`authorizes_precursive`] on every member.
pub fn check_precursive_equivalence(g: &GroupChronicle) -> Result<Option<Violation>, CheckError> {
    let auth = Authorizer::new(g)?;
    for (i, e) in auth.index().events().iter().enumerate() {
        let fast = auth.precursive_verdict(i);
        let slow = authorizes_precursive(g, e)?;
        if fast.authorized != slow.authorized {
            let detail = format!(
                "windowed precursive verdict is {}, wound-back chronicle gives {}",
                fast.reason, slow.reason
            );
            return Ok(Some(
                Violation::new(Invariant::OracleMismatch, g.clone(), detail).with_event(e),
            ));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auth::{mk_assign, mk_revoke};
    use crate::fixtures::{self, entity};

    #[test]
    fn authorized_revoke_is_exempt() {
        let f = fixtures::s1();
        assert_eq!(check_authorization_safety(&f.base, &f.rv).unwrap(), None);
        assert_eq!(check_query_safety(&f.base, &f.rv).unwrap(), None);
    }

    #[test]
    fn appending_an_assign_keeps_verdicts() {
        let f = fixtures::s2();
        let e = make_event(f.chronicle.heads(), mk_assign(entity("C"), f.g1.id(), "q"));
        assert_eq!(check_authorization_safety(&f.chronicle, &e).unwrap(), None);
        assert_eq!(check_query_safety(&f.chronicle, &e).unwrap(), None);
    }

    #[test]
    fn backdated_assign_changes_no_query() {
        let f = fixtures::s3();
        let g = &fixtures::s1().chronicle;
        assert_eq!(check_query_safety(g, &f.backdated).unwrap(), None);
        assert!(!authorizes(g, &f.backdated).unwrap().authorized);
    }

    #[test]
    fn preconditions() {
        let f = fixtures::s1();
        let stray = make_event([f.rv.id()].into(), mk_assign(entity("C"), f.g_c.id(), "x"));
        assert_eq!(
            check_authorization_safety(&f.base, &stray),
            Err(CheckError::PreconditionViolated(
                ChronicleError::DanglingTimestamp
            ))
        );
        assert!(check_revocation_safety(&GroupChronicle::new(), f.a.voc()).is_err());
    }

    #[test]
    fn backdating_is_ineffective_in_s1() {
        let f = fixtures::s1();
        let v = mk_assign(entity("C"), f.g_c.id(), "z");
        assert_eq!(check_revocation_safety(&f.chronicle, &v).unwrap(), None);
    }

    #[test]
    fn precursor_only_evaluator_is_caught() {
        let f = fixtures::s1();
        let v = mk_assign(entity("C"), f.g_c.id(), "z");
        let w = check_revocation_safety_with(&f.chronicle, &v, RevocationScope::PrecursorsOnly)
            .unwrap()
            .expect("violation");
        assert!(!w.timestamp.unwrap().contains(&f.rv.id()));
    }

    #[test]
    fn evaluators_agree_on_fixtures() {
        for g in [
            fixtures::s0().chronicle,
            fixtures::s1().chronicle,
            fixtures::s2().chronicle,
            fixtures::s3().chronicle,
        ] {
            assert_eq!(check_oracle_equivalence(&g).unwrap(), None);
        }
    }

    #[test]
    fn mutual_revocation_outside_the_discipline_is_flagged() {
        // B holds a revoke capability and revokes it on two concurrent
        // branches. Each revocation cancels the other's claim, so neither is
        // authorized; adding the second one de-authorizes the first although
        // it is itself unauthorized.
        let f = fixtures::s1();
        let r1 = make_event(
            f.base.heads(),
            mk_revoke(entity("B"), f.g_b.id(), f.g_b.id()),
        );
        let side = f.base.log(mk_assign(entity("C"), f.g_c.id(), "s"));
        let g = side.admit(r1).unwrap();
        let r2 = make_event(side.heads(), mk_revoke(entity("B"), f.g_b.id(), f.g_b.id()));
        let w = check_authorization_safety(&g, &r2)
            .unwrap()
            .expect("violation");
        assert_eq!(w.invariant, Invariant::AuthorizationSafety);
    }
}
