//! The group chronicle: a link-closed set of hash-linked events, merged by
//! union and partially ordered by reachability over predecessor links.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use fixedbitset::FixedBitSet;

use crate::error::ChronicleError;
use crate::event::{make_event, Event, Invocation};
use crate::ids::{Capability, EventId};

/// Downward-closed set of event ids: the full causal history of an event.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Timestamp(BTreeSet<EventId>);

impl Timestamp {
    pub fn from_ids(ids: impl IntoIterator<Item = EventId>) -> Self {
        Self(ids.into_iter().collect())
    }

    pub fn ids(&self) -> &BTreeSet<EventId> {
        &self.0
    }

    pub fn contains(&self, id: &EventId) -> bool {
        self.0.contains(id)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_subset(&self, other: &Timestamp) -> bool {
        self.0.is_subset(&other.0)
    }

    /// Downward-closed with respect to `g`: every precursor of every member
    /// that names an event of `g` is itself a member.
    pub fn is_valid_in(&self, g: &GroupChronicle) -> bool {
        self.0.iter().all(|id| match g.get(id) {
            Some(e) => e.direct_preds().iter().all(|p| self.0.contains(p)),
            None => true,
        })
    }
}

/// A set of events closed under predecessor links, keyed by id.
///
/// Mutating operations return new values; the receiver is never altered.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GroupChronicle {
    events: BTreeMap<EventId, Event>,
}

impl GroupChronicle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn contains(&self, id: &EventId) -> bool {
        self.events.contains_key(id)
    }

    pub fn get(&self, id: &EventId) -> Option<&Event> {
        self.events.get(id)
    }

    /// Members in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = &Event> {
        self.events.values()
    }

    pub fn events(&self) -> Vec<Event> {
        self.events.values().cloned().collect()
    }

    pub fn ids(&self) -> impl Iterator<Item = EventId> + '_ {
        self.events.keys().copied()
    }

    /// In-place insertion, used where value semantics are not needed.
    pub fn insert(&mut self, e: Event) -> Result<bool, ChronicleError> {
        if let Some(missing) = e
            .direct_preds()
            .iter()
            .find(|p| !self.events.contains_key(p))
        {
            return Err(ChronicleError::DanglingPredecessor(*missing));
        }
        Ok(self.events.insert(e.id(), e).is_none())
    }

    pub fn admit(&self, e: Event) -> Result<GroupChronicle, ChronicleError> {
        let mut next = self.clone();
        next.insert(e)?;
        Ok(next)
    }

    /// Logs `v` as an event succeeding every current member.
    pub fn log(&self, v: Invocation) -> GroupChronicle {
        let e = make_event(self.heads(), v);
        let mut next = self.clone();
        next.events.insert(e.id(), e);
        next
    }

    pub fn join(&self, other: &GroupChronicle) -> GroupChronicle {
        let mut next = self.clone();
        for (id, e) in &other.events {
            next.events.entry(*id).or_insert_with(|| e.clone());
        }
        next
    }

    pub fn now(&self) -> Timestamp {
        Timestamp(self.events.keys().copied().collect())
    }

    /// Members that are a direct predecessor of no other member.
    pub fn heads(&self) -> BTreeSet<EventId> {
        let mut heads: BTreeSet<EventId> = self.events.keys().copied().collect();
        for e in self.events.values() {
            for p in e.direct_preds() {
                heads.remove(p);
            }
        }
        heads
    }

    /// Downward closure of `ids` over links; unknown ids are kept as-is.
    pub fn closure(&self, ids: impl IntoIterator<Item = EventId>) -> Timestamp {
        let mut out = BTreeSet::new();
        let mut stack: Vec<EventId> = ids.into_iter().collect();
        while let Some(id) = stack.pop() {
            if out.insert(id) {
                if let Some(e) = self.events.get(&id) {
                    stack.extend(e.direct_preds().iter().copied());
                }
            }
        }
        Timestamp(out)
    }

    /// Maximal elements of `t` under the causal order of this chronicle.
    pub fn frontier(&self, t: &Timestamp) -> BTreeSet<EventId> {
        let mut covered = BTreeSet::new();
        for id in t.ids() {
            if let Some(e) = self.events.get(id) {
                covered.extend(self.closure(e.direct_preds().iter().copied()).0);
            }
        }
        t.ids().difference(&covered).copied().collect()
    }

    /// Full timestamp of `e`: ids of all its strict precursors.
    ///
    /// `e` need not be a member, but all its predecessors must be.
    pub fn timestamp_of(&self, e: &Event) -> Result<Timestamp, ChronicleError> {
        if let Some(missing) = e.direct_preds().iter().find(|p| !self.contains(p)) {
            return Err(ChronicleError::DanglingPredecessor(*missing));
        }
        Ok(self.closure(e.direct_preds().iter().copied()))
    }

    pub fn tme(&self, e: &Event) -> Result<Timestamp, ChronicleError> {
        self.require_member(e)?;
        self.timestamp_of(e)
    }

    pub fn precedes(&self, e1: &Event, e2: &Event) -> Result<bool, ChronicleError> {
        self.require_member(e1)?;
        Ok(self.tme(e2)?.contains(&e1.id()))
    }

    pub fn concurrent(&self, e1: &Event, e2: &Event) -> Result<bool, ChronicleError> {
        Ok(e1 != e2 && !self.precedes(e1, e2)? && !self.precedes(e2, e1)?)
    }

    pub fn creation(&self) -> Result<Event, ChronicleError> {
        if !self.valid() {
            return Err(ChronicleError::Invalid);
        }
        self.creation_unchecked().ok_or(ChronicleError::Invalid)
    }

    fn creation_unchecked(&self) -> Option<Event> {
        self.events
            .values()
            .find(|e| e.kind() == Capability::Create)
            .cloned()
    }

    /// Winds the chronicle back to the strict precursors of `e`.
    pub fn pre(&self, e: &Event) -> Result<GroupChronicle, ChronicleError> {
        if !self.valid() {
            return Err(ChronicleError::Invalid);
        }
        let t = self.tme(e)?;
        Ok(self.restrict(|id| t.contains(id)))
    }

    /// Precursors of `e` together with the events concurrent to it.
    pub fn conc(&self, e: &Event) -> Result<GroupChronicle, ChronicleError> {
        if !self.valid() {
            return Err(ChronicleError::Invalid);
        }
        self.require_member(e)?;
        let index = CausalIndex::new(self);
        let at = index.position(&e.id()).expect("member");
        Ok(self.restrict(|id| {
            let j = index.position(id).expect("member");
            j != at && !index.precedes(at, j)
        }))
    }

    /// Sub-chronicle of the members selected by `keep`. Callers must pick a
    /// link-closed selection.
    pub(crate) fn restrict(&self, keep: impl Fn(&EventId) -> bool) -> GroupChronicle {
        GroupChronicle {
            events: self
                .events
                .iter()
                .filter(|(id, _)| keep(id))
                .map(|(id, e)| (*id, e.clone()))
                .collect(),
        }
    }

    /// Unique create event; every member comparable with it; every member's
    /// timestamp downward-closed and fully present.
    pub fn valid(&self) -> bool {
        self.creation_position(&CausalIndex::new(self)).is_some()
    }

    /// Position of the create event in `index` (built from this chronicle),
    /// if the chronicle is valid.
    pub(crate) fn creation_position(&self, index: &CausalIndex) -> Option<usize> {
        let mut creates = self
            .events
            .values()
            .filter(|e| e.kind() == Capability::Create);
        let c = creates.next()?;
        if creates.next().is_some() {
            return None;
        }
        if self
            .events
            .values()
            .any(|e| e.direct_preds().iter().any(|p| !self.contains(p)))
        {
            return None;
        }
        let ci = index.position(&c.id())?;
        (0..index.len())
            .all(|j| j == ci || index.precedes(j, ci) || index.precedes(ci, j))
            .then_some(ci)
    }

    fn require_member(&self, e: &Event) -> Result<(), ChronicleError> {
        if self.contains(&e.id()) {
            Ok(())
        } else {
            Err(ChronicleError::NotInChronicle(e.id()))
        }
    }

    /// Members in a deterministic topological order (ties broken by id).
    pub fn topological(&self) -> Vec<Event> {
        let index = CausalIndex::new(self);
        index.events().to_vec()
    }
}

impl FromIterator<Event> for Result<GroupChronicle, ChronicleError> {
    fn from_iter<I: IntoIterator<Item = Event>>(iter: I) -> Self {
        let mut g = GroupChronicle::new();
        for e in iter {
            g.insert(e)?;
        }
        Ok(g)
    }
}

/// Dense causal-order index over a chronicle: events in topological order and
/// the strict-precursor set of each as a bitset over positions.
#[derive(Clone, Debug)]
pub struct CausalIndex {
    events: Vec<Event>,
    position: HashMap<EventId, usize>,
    ancestors: Vec<FixedBitSet>,
}

impl CausalIndex {
    pub fn new(g: &GroupChronicle) -> Self {
        // Kahn's algorithm with an id-ordered ready set.
        let mut indegree: BTreeMap<EventId, usize> = BTreeMap::new();
        let mut children: HashMap<EventId, Vec<EventId>> = HashMap::new();
        for e in g.iter() {
            let known = e.direct_preds().iter().filter(|p| g.contains(p)).count();
            indegree.insert(e.id(), known);
            for p in e.direct_preds() {
                children.entry(*p).or_default().push(e.id());
            }
        }
        let mut ready: BTreeSet<EventId> = indegree
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(id, _)| *id)
            .collect();
        let n = g.len();
        let mut events = Vec::with_capacity(n);
        let mut position = HashMap::with_capacity(n);
        let mut ancestors: Vec<FixedBitSet> = Vec::with_capacity(n);
        while let Some(id) = ready.pop_first() {
            let e = g.get(&id).expect("member").clone();
            let mut anc = FixedBitSet::with_capacity(n);
            for p in e.direct_preds() {
                if let Some(&pi) = position.get(p) {
                    anc.insert(pi);
                    anc.union_with(&ancestors[pi]);
                }
            }
            position.insert(id, events.len());
            events.push(e);
            ancestors.push(anc);
            for c in children.get(&id).into_iter().flatten() {
                if let Some(d) = indegree.get_mut(c) {
                    *d -= 1;
                    if *d == 0 {
                        ready.insert(*c);
                    }
                }
            }
        }
        Self {
            events,
            position,
            ancestors,
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn event(&self, i: usize) -> &Event {
        &self.events[i]
    }

    pub fn position(&self, id: &EventId) -> Option<usize> {
        self.position.get(id).copied()
    }

    /// Strict precursors of the event at position `i`.
    pub fn ancestors(&self, i: usize) -> &FixedBitSet {
        &self.ancestors[i]
    }

    /// Whether the event at `i` strictly precedes the event at `j`.
    pub fn precedes(&self, i: usize, j: usize) -> bool {
        self.ancestors[j].contains(i)
    }

    pub fn concurrent(&self, i: usize, j: usize) -> bool {
        i != j && !self.precedes(i, j) && !self.precedes(j, i)
    }

    /// Precursor set of an event with the given direct predecessors, which
    /// must all be indexed.
    pub fn closure_of<'a>(
        &self,
        preds: impl IntoIterator<Item = &'a EventId>,
    ) -> Result<FixedBitSet, ChronicleError> {
        let mut set = FixedBitSet::with_capacity(self.len());
        for p in preds {
            let pi = self
                .position(p)
                .ok_or(ChronicleError::DanglingPredecessor(*p))?;
            set.insert(pi);
            set.union_with(&self.ancestors[pi]);
        }
        Ok(set)
    }
}
