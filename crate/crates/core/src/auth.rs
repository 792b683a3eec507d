//! Capability layer: invocation constructors, discursive and precursive
//! authorization, and the `caps` / `values` queries.
//!
//! An event other than the create event and its precursors is authorized when
//!
//! * it presents the id of a grant among its strict precursors that is itself
//!   authorized, names the event's subject as recipient and confers the
//!   event's operation subtype,
//! * no authorized revocation of that grant precedes or is concurrent to it,
//! * and, for revocations, the revoked grant is among its strict precursors.
//!
//! Revocations may depend on each other sideways through concurrency, so the
//! recursive definition is evaluated as a least fixed point over three truth
//! values. Events whose verdict stays undetermined sit on (or hang off) a
//! dependency cycle and are reported as unauthorized with
//! [`Reason::CycleInvolved`]. The result depends only on the event set.

use std::fmt;

use fixedbitset::FixedBitSet;
use serde::Serialize;

use crate::chronicle::{CausalIndex, GroupChronicle};
use crate::error::ChronicleError;
use crate::event::{Event, Invocation};
use crate::ids::{Capability, EntityId, EventId};

pub fn mk_create(sbj: EntityId) -> Invocation {
    Invocation::Create { sbj }
}

pub fn mk_grant(
    sbj: EntityId,
    grnt: Option<EventId>,
    cap: Capability,
    obj: EntityId,
) -> Invocation {
    Invocation::Grant {
        sbj,
        grnt,
        cap,
        obj,
    }
}

pub fn mk_revoke(sbj: EntityId, grnt: EventId, obj: EventId) -> Invocation {
    Invocation::Revoke { sbj, grnt, obj }
}

pub fn mk_assign(sbj: EntityId, grnt: EventId, name: impl Into<String>) -> Invocation {
    Invocation::Assign {
        sbj,
        grnt,
        name: name.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Reason {
    Creation,
    CreationPrecursor,
    GrantMatched,
    NoMatchingGrant,
    SubjectMismatch,
    CapabilityMismatch,
    RevokedConcurrently,
    RevokeTargetMissing,
    CycleInvolved,
}

impl Reason {
    pub fn authorizes(self) -> bool {
        matches!(
            self,
            Reason::Creation | Reason::CreationPrecursor | Reason::GrantMatched
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Reason::Creation => "Creation",
            Reason::CreationPrecursor => "CreationPrecursor",
            Reason::GrantMatched => "GrantMatched",
            Reason::NoMatchingGrant => "NoMatchingGrant",
            Reason::SubjectMismatch => "SubjectMismatch",
            Reason::CapabilityMismatch => "CapabilityMismatch",
            Reason::RevokedConcurrently => "RevokedConcurrently",
            Reason::RevokeTargetMissing => "RevokeTargetMissing",
            Reason::CycleInvolved => "CycleInvolved",
        }
    }
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Authorization decision plus the clause that decided it. Only the boolean
/// carries meaning; the reason is diagnostic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct AuthVerdict {
    pub authorized: bool,
    pub reason: Reason,
}

impl AuthVerdict {
    pub fn new(reason: Reason) -> Self {
        Self {
            authorized: reason.authorizes(),
            reason,
        }
    }
}

impl fmt::Display for AuthVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let word = if self.authorized {
            "authorized"
        } else {
            "unauthorized"
        };
        write!(f, "{word} ({})", self.reason)
    }
}

/// Which revocations may cancel an event's claim.
///
/// Only [`RevocationScope::PrecursorsAndConcurrent`] is correct. The
/// precursor-only variant exists so the revocation-safety checker can be shown
/// to catch an evaluator that ignores concurrent revocations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RevocationScope {
    #[default]
    PrecursorsAndConcurrent,
    PrecursorsOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Tri {
    True,
    False,
    Unknown,
}

/// Outcome of the parts of the predicate that do not depend on other
/// verdicts.
#[derive(Clone, Debug)]
enum Shape {
    Decided(Reason),
    Depends { grant: usize, revokes: Vec<usize> },
}

/// Evaluation of the predicate over the members of a downward-closed window
/// of an indexed chronicle. The full window is the chronicle itself; the
/// strict precursors of a member give its precursive view.
struct Solver<'a> {
    index: &'a CausalIndex,
    creation: usize,
    scope: RevocationScope,
    window: &'a FixedBitSet,
}

impl Solver<'_> {
    fn shape(&self, voc: &Invocation, pre: &FixedBitSet, member: Option<usize>) -> Shape {
        let index = self.index;
        if let Some(i) = member {
            if i == self.creation {
                return Shape::Decided(Reason::Creation);
            }
            if index.precedes(i, self.creation) {
                return Shape::Decided(Reason::CreationPrecursor);
            }
        }
        let Some(claim) = voc.grnt() else {
            return Shape::Decided(Reason::NoMatchingGrant);
        };
        let Some(grant) = index.position(&claim).filter(|&g| pre.contains(g)) else {
            return Shape::Decided(Reason::NoMatchingGrant);
        };
        let Some((cap, obj)) = index.event(grant).voc().granted() else {
            return Shape::Decided(Reason::NoMatchingGrant);
        };
        if obj != voc.sbj() {
            return Shape::Decided(Reason::SubjectMismatch);
        }
        if cap != voc.kind() {
            return Shape::Decided(Reason::CapabilityMismatch);
        }
        if let Some(target) = voc.revoked() {
            let found = index
                .position(&target)
                .filter(|&t| pre.contains(t))
                .is_some_and(|t| index.event(t).kind() == Capability::Grant);
            if !found {
                return Shape::Decided(Reason::RevokeTargetMissing);
            }
        }
        let revokes = self
            .window
            .ones()
            .filter(|&j| {
                let in_scope = match (self.scope, member) {
                    (RevocationScope::PrecursorsOnly, _) => pre.contains(j),
                    (RevocationScope::PrecursorsAndConcurrent, Some(i)) => {
                        j != i && !index.precedes(i, j)
                    }
                    (RevocationScope::PrecursorsAndConcurrent, None) => true,
                };
                in_scope && index.event(j).voc().revoked() == Some(claim)
            })
            .collect();
        Shape::Depends { grant, revokes }
    }

    fn combine(shape: &Shape, truth: &[Tri]) -> (Tri, Reason) {
        match shape {
            Shape::Decided(reason) => {
                let t = if reason.authorizes() {
                    Tri::True
                } else {
                    Tri::False
                };
                (t, *reason)
            }
            Shape::Depends { grant, revokes } => {
                let grant_t = truth[*grant];
                if grant_t == Tri::False {
                    return (Tri::False, Reason::NoMatchingGrant);
                }
                let mut unknown = grant_t == Tri::Unknown;
                for &rv in revokes {
                    match truth[rv] {
                        Tri::True => return (Tri::False, Reason::RevokedConcurrently),
                        Tri::Unknown => unknown = true,
                        Tri::False => {}
                    }
                }
                if unknown {
                    (Tri::Unknown, Reason::CycleInvolved)
                } else {
                    (Tri::True, Reason::GrantMatched)
                }
            }
        }
    }

    /// Least fixed point over the window. Positions outside it stay unknown.
    fn solve(&self) -> (Vec<Tri>, Vec<Reason>) {
        let n = self.index.len();
        let mut truth = vec![Tri::Unknown; n];
        let mut reasons = vec![Reason::CycleInvolved; n];
        let shapes: Vec<(usize, Shape)> = self
            .window
            .ones()
            .map(|i| {
                let e = self.index.event(i);
                (i, self.shape(e.voc(), self.index.ancestors(i), Some(i)))
            })
            .collect();
        loop {
            let mut changed = false;
            for (i, shape) in &shapes {
                if truth[*i] != Tri::Unknown {
                    continue;
                }
                let (t, reason) = Self::combine(shape, &truth);
                if t != Tri::Unknown {
                    truth[*i] = t;
                    reasons[*i] = reason;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        (truth, reasons)
    }

    /// Verdict of a new event at `pre` given the window's verdicts.
    fn evaluate_at(&self, voc: &Invocation, pre: &FixedBitSet, truth: &[Tri]) -> AuthVerdict {
        let shape = self.shape(voc, pre, None);
        match Self::combine(&shape, truth) {
            (Tri::Unknown, _) => AuthVerdict::new(Reason::CycleInvolved),
            (_, reason) => AuthVerdict::new(reason),
        }
    }
}

/// Memoized evaluator for one chronicle. Construction computes the verdict of
/// every member; hypothetical events at timestamps within the chronicle are
/// evaluated on demand against those verdicts.
#[derive(Clone, Debug)]
pub struct Authorizer {
    index: CausalIndex,
    creation: usize,
    scope: RevocationScope,
    everything: FixedBitSet,
    truth: Vec<Tri>,
    reasons: Vec<Reason>,
}

impl Authorizer {
    pub fn new(g: &GroupChronicle) -> Result<Self, ChronicleError> {
        Self::with_scope(g, RevocationScope::default())
    }

    pub fn with_scope(g: &GroupChronicle, scope: RevocationScope) -> Result<Self, ChronicleError> {
        let index = CausalIndex::new(g);
        let creation = g.creation_position(&index).ok_or(ChronicleError::Invalid)?;
        let mut everything = FixedBitSet::with_capacity(index.len());
        everything.insert_range(..);
        let (truth, reasons) = Solver {
            index: &index,
            creation,
            scope,
            window: &everything,
        }
        .solve();
        Ok(Self {
            index,
            creation,
            scope,
            everything,
            truth,
            reasons,
        })
    }

    fn solver(&self) -> Solver<'_> {
        Solver {
            index: &self.index,
            creation: self.creation,
            scope: self.scope,
            window: &self.everything,
        }
    }

    pub fn scope(&self) -> RevocationScope {
        self.scope
    }

    pub fn index(&self) -> &CausalIndex {
        &self.index
    }

    pub fn creation(&self) -> &Event {
        self.index.event(self.creation)
    }

    /// Verdict of a member, by id.
    pub fn verdict_of(&self, id: &EventId) -> Option<AuthVerdict> {
        self.index.position(id).map(|i| self.member_verdict(i))
    }

    fn member_verdict(&self, i: usize) -> AuthVerdict {
        AuthVerdict::new(self.reasons[i])
    }

    /// Verdict of `e`, which is either a member or an event whose direct
    /// predecessors are all members.
    pub fn evaluate(&self, e: &Event) -> Result<AuthVerdict, ChronicleError> {
        if let Some(i) = self.index.position(&e.id()) {
            return Ok(self.member_verdict(i));
        }
        let pre = self
            .index
            .closure_of(e.direct_preds())
            .map_err(|_| ChronicleError::DanglingTimestamp)?;
        Ok(self.evaluate_at(e.voc(), &pre))
    }

    /// Verdict of a new event carrying `voc` whose strict precursors are the
    /// positions in `pre` (which must be downward-closed).
    pub fn evaluate_at(&self, voc: &Invocation, pre: &FixedBitSet) -> AuthVerdict {
        self.solver().evaluate_at(voc, pre, &self.truth)
    }

    /// Precursive verdict of the member at position `i`: the predicate
    /// evaluated on the chronicle wound back to the member's strict
    /// precursors. Agrees with [`authorizes_precursive`].
    pub fn precursive_verdict(&self, i: usize) -> AuthVerdict {
        if i == self.creation {
            return AuthVerdict::new(Reason::Creation);
        }
        if self.index.precedes(i, self.creation) {
            return AuthVerdict::new(Reason::CreationPrecursor);
        }
        let pre = self.index.ancestors(i);
        if !pre.contains(self.creation) {
            return AuthVerdict::new(Reason::NoMatchingGrant);
        }
        let solver = Solver {
            index: &self.index,
            creation: self.creation,
            scope: self.scope,
            window: pre,
        };
        let (truth, _) = solver.solve();
        solver.evaluate_at(self.index.event(i).voc(), pre, &truth)
    }

    pub fn is_authorized(&self, i: usize) -> bool {
        self.truth[i] == Tri::True
    }

    /// Authorized grants with no authorized revocation, in id order.
    pub fn caps(&self) -> Vec<Event> {
        let revoked: Vec<EventId> = (0..self.index.len())
            .filter(|&j| self.is_authorized(j))
            .filter_map(|j| self.index.event(j).voc().revoked())
            .collect();
        let mut out: Vec<Event> = (0..self.index.len())
            .filter(|&i| self.is_authorized(i))
            .map(|i| self.index.event(i))
            .filter(|e| e.kind() == Capability::Grant && !revoked.contains(&e.id()))
            .cloned()
            .collect();
        out.sort_by_key(Event::id);
        out
    }

    /// Authorized assigns without an authorized assign successor, in id order.
    pub fn values(&self) -> Vec<Event> {
        let assigns: Vec<usize> = (0..self.index.len())
            .filter(|&i| self.is_authorized(i) && self.index.event(i).kind() == Capability::Assign)
            .collect();
        let mut out: Vec<Event> = assigns
            .iter()
            .filter(|&&i| !assigns.iter().any(|&j| self.index.precedes(i, j)))
            .map(|&i| self.index.event(i).clone())
            .collect();
        out.sort_by_key(Event::id);
        out
    }

    /// Verdicts of all members in id order.
    pub fn all_verdicts(&self) -> Vec<(Event, AuthVerdict)> {
        let mut out: Vec<(Event, AuthVerdict)> = (0..self.index.len())
            .map(|i| (self.index.event(i).clone(), self.member_verdict(i)))
            .collect();
        out.sort_by_key(|(e, _)| e.id());
        out
    }
}

/// Discursive authorization of `e` by `g`: against precursors and concurrent
/// events. `e` may be a member or an event at a timestamp within `g`.
pub fn authorizes(g: &GroupChronicle, e: &Event) -> Result<AuthVerdict, ChronicleError> {
    if !g.valid() {
        return Err(ChronicleError::Invalid);
    }
    if e.direct_preds().iter().any(|p| !g.contains(p)) {
        return Err(ChronicleError::DanglingTimestamp);
    }
    Authorizer::new(g)?.evaluate(e)
}

/// Precursive authorization: the predicate evaluated on `g` wound back to the
/// strict precursors of `e`. Immutable under any extension of `g`.
pub fn authorizes_precursive(g: &GroupChronicle, e: &Event) -> Result<AuthVerdict, ChronicleError> {
    let creation = g.creation()?;
    if *e == creation {
        return Ok(AuthVerdict::new(Reason::Creation));
    }
    let pre = g.pre(e)?;
    if pre.contains(&creation.id()) {
        return Authorizer::new(&pre)?.evaluate(e);
    }
    if g.tme(&creation)?.contains(&e.id()) {
        Ok(AuthVerdict::new(Reason::CreationPrecursor))
    } else {
        Ok(AuthVerdict::new(Reason::NoMatchingGrant))
    }
}

/// Precursive verdict of a candidate event against a replica's chronicle,
/// where `e` need not be a member yet. Used to gate admission.
pub fn authorizes_precursive_candidate(
    g: &GroupChronicle,
    e: &Event,
) -> Result<AuthVerdict, ChronicleError> {
    let t = g.timestamp_of(e)?;
    let pre = g.restrict(|id| t.contains(id));
    if !pre.valid() {
        return Ok(AuthVerdict::new(Reason::NoMatchingGrant));
    }
    Authorizer::new(&pre)?.evaluate(e)
}

pub fn caps(g: &GroupChronicle) -> Result<Vec<Event>, ChronicleError> {
    Ok(Authorizer::new(g)?.caps())
}

pub fn values(g: &GroupChronicle) -> Result<Vec<Event>, ChronicleError> {
    Ok(Authorizer::new(g)?.values())
}
