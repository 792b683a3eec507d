//! Deterministic discrete-event simulation of replicas exchanging events over
//! a lossy, delaying network, with Byzantine participants.
//!
//! Each tick delivers the messages due at that tick, then runs the scripted
//! actions for the tick and, if enabled, one random action. Honest replicas
//! log at their local frontier, admit only precursively authorized events
//! whose subject matches the message origin, and buffer events whose
//! predecessors have not arrived. Byzantine replicas store everything they
//! receive and may backdate, equivocate and omit.

pub mod scenario;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::auth::{authorizes_precursive_candidate, mk_assign, mk_grant, mk_revoke, Authorizer};
use crate::chronicle::{GroupChronicle, Timestamp};
use crate::event::{make_event, Event, Invocation};
use crate::ids::{Capability, EntityId, EventId};
use crate::oracle::check::{Invariant, Violation};
use crate::oracle::generate::{backdated_frontier, forged_invocation, honest_options};
use crate::oracle::witness::convergence_difference;
use crate::oracle::UNKNOWN_ID;
use crate::preset::{build_preset_labeled, build_setup, PolicyPreset, PresetKind, SetupChronicle};

/// Probability that some replica acts on a tick when random activity is on.
const ACTIVITY: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("{0} is not a replica")]
    UnknownReplica(EntityId),
    #[error("{0} is not Byzantine")]
    NotByzantine(EntityId),
    #[error("{0} is not honest")]
    NotHonest(EntityId),
    #[error("timestamp is not downward-closed at or after creation in the replica's chronicle")]
    InvalidTimestamp,
    #[error("equivocation needs two distinct events")]
    IdenticalEvents,
    #[error("invalid world config: {0}")]
    InvalidConfig(String),
}

/// How the group is set up before the first tick. Every replica starts from
/// the same setup chronicle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SetupSpec {
    /// A preset over the replica roster; the first replica is the creator.
    Preset(PresetKind),
    /// Labeled grants issued by `creator` and chained before the create event.
    Custom {
        creator: EntityId,
        grants: Vec<(String, Capability, EntityId)>,
    },
}

/// Reference to an event from a script.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EventRef {
    Label(String),
    Id(EventId),
    Unknown,
}

/// A scripted invocation. The subject is always the acting replica.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InvocationSpec {
    Assign {
        claim: EventRef,
        name: String,
    },
    Grant {
        claim: Option<EventRef>,
        cap: Capability,
        obj: EntityId,
    },
    Revoke {
        claim: EventRef,
        target: EventRef,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    Log(InvocationSpec),
    Backdate {
        after: Vec<EventRef>,
        inv: InvocationSpec,
    },
    /// The first event goes to `split`, the second to every other replica.
    Equivocate {
        first: InvocationSpec,
        second: InvocationSpec,
        split: Vec<EntityId>,
    },
    Omit(Vec<EntityId>),
}

impl Action {
    pub fn is_adversarial(&self) -> bool {
        !matches!(self, Action::Log(_))
    }
}

/// Fixed delivery delays for one scripted send. Recipients with a fixed delay
/// are never dropped.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DelaySpec {
    pub all: Option<u64>,
    pub per: BTreeMap<EntityId, u64>,
}

impl DelaySpec {
    fn for_recipient(&self, to: &EntityId) -> Option<u64> {
        self.per.get(to).copied().or(self.all)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScriptedAction {
    pub at: u64,
    pub actor: EntityId,
    pub action: Action,
    /// Labels for the created events, in creation order.
    pub labels: Vec<String>,
    pub delay: DelaySpec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldConfig {
    /// Roster in order, with Byzantine flags.
    pub replicas: Vec<(EntityId, bool)>,
    pub setup: SetupSpec,
    pub drop_rate: f64,
    pub max_delay: u64,
    pub script: Vec<ScriptedAction>,
    /// Whether replicas also act at random during the first `max_steps`
    /// ticks.
    pub random_actions: bool,
    pub seed: u64,
    pub max_steps: u64,
}

impl WorldConfig {
    /// Randomly acting replicas under a preset, no script.
    pub fn random(
        preset: PresetKind,
        replicas: Vec<(EntityId, bool)>,
        seed: u64,
        max_steps: u64,
    ) -> Self {
        Self {
            replicas,
            setup: SetupSpec::Preset(preset),
            drop_rate: 0.0,
            max_delay: 0,
            script: Vec::new(),
            random_actions: true,
            seed,
            max_steps,
        }
    }

    pub fn entities(&self) -> impl Iterator<Item = &EntityId> {
        self.replicas.iter().map(|(e, _)| e)
    }

    pub fn is_byzantine(&self, e: &EntityId) -> Option<bool> {
        self.replicas.iter().find(|(r, _)| r == e).map(|(_, b)| *b)
    }

    pub fn build_setup(&self) -> Result<SetupChronicle, SimError> {
        match &self.setup {
            SetupSpec::Preset(kind) => {
                let p = PolicyPreset::new(*kind, self.entities().cloned().collect())
                    .map_err(SimError::InvalidConfig)?;
                Ok(build_preset_labeled(&p))
            }
            SetupSpec::Custom { creator, grants } => {
                let mut seen = BTreeSet::new();
                for (label, _, _) in grants {
                    if !seen.insert(label) {
                        return Err(SimError::InvalidConfig(format!(
                            "setup label {label} is defined twice"
                        )));
                    }
                }
                build_setup(
                    creator,
                    grants.iter().map(|(label, cap, obj)| {
                        (
                            label.clone(),
                            mk_grant(creator.clone(), None, *cap, obj.clone()),
                        )
                    }),
                )
                .map_err(|e| SimError::InvalidConfig(e.to_string()))
            }
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let invalid = |m: String| Err(SimError::InvalidConfig(m));
        if self.replicas.is_empty() {
            return invalid("at least one replica is required".into());
        }
        let distinct: BTreeSet<_> = self.entities().collect();
        if distinct.len() != self.replicas.len() {
            return invalid("replica names must be distinct".into());
        }
        if self.replicas.iter().all(|(_, b)| *b) {
            return invalid("at least one replica must be honest".into());
        }
        if !(0.0..=1.0).contains(&self.drop_rate) {
            return invalid(format!("drop rate {} is not a probability", self.drop_rate));
        }
        let known = |e: &EntityId| {
            self.is_byzantine(e)
                .map(|_| ())
                .ok_or_else(|| SimError::UnknownReplica(e.clone()))
        };
        for a in &self.script {
            let byz = self
                .is_byzantine(&a.actor)
                .ok_or_else(|| SimError::UnknownReplica(a.actor.clone()))?;
            if a.action.is_adversarial() && !byz {
                return Err(SimError::NotByzantine(a.actor.clone()));
            }
            match &a.action {
                Action::Equivocate { split, .. } => split.iter().try_for_each(known)?,
                Action::Omit(targets) => targets.iter().try_for_each(known)?,
                _ => {}
            }
            a.delay.per.keys().try_for_each(known)?;
        }
        self.build_setup().map(|_| ())
    }
}

/// What happened to a delivered or flushed event at an honest replica.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Receipt {
    Admitted,
    Buffered,
    Rejected,
    Duplicate,
}

impl Receipt {
    fn as_str(self) -> &'static str {
        match self {
            Receipt::Admitted => "admitted",
            Receipt::Buffered => "buffered",
            Receipt::Rejected => "rejected",
            Receipt::Duplicate => "duplicate",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Replica {
    entity: EntityId,
    byzantine: bool,
    chronicle: GroupChronicle,
    /// Events awaiting predecessors, with the origin they arrived from.
    pending: Vec<(Event, EntityId)>,
    rejected: BTreeSet<EventId>,
    /// Replicas a Byzantine replica currently withholds its events from.
    omit: BTreeSet<EntityId>,
}

impl Replica {
    pub fn entity(&self) -> &EntityId {
        &self.entity
    }

    pub fn is_byzantine(&self) -> bool {
        self.byzantine
    }

    pub fn chronicle(&self) -> &GroupChronicle {
        &self.chronicle
    }

    pub fn pending(&self) -> impl Iterator<Item = &Event> {
        self.pending.iter().map(|(e, _)| e)
    }

    fn knows(&self, id: &EventId) -> bool {
        self.chronicle.contains(id)
            || self.rejected.contains(id)
            || self.pending.iter().any(|(e, _)| e.id() == *id)
    }

    fn receive(&mut self, e: Event, origin: EntityId) -> Receipt {
        if self.knows(&e.id()) {
            return Receipt::Duplicate;
        }
        if !self.byzantine && e.voc().sbj() != &origin {
            self.rejected.insert(e.id());
            return Receipt::Rejected;
        }
        if e.direct_preds().iter().all(|p| self.chronicle.contains(p)) {
            self.settle(e)
        } else if e.direct_preds().iter().any(|p| self.rejected.contains(p)) {
            self.rejected.insert(e.id());
            Receipt::Rejected
        } else {
            self.pending.push((e, origin));
            Receipt::Buffered
        }
    }

    /// Admits or rejects an event whose predecessors are all present.
    fn settle(&mut self, e: Event) -> Receipt {
        let ok = self.byzantine
            || authorizes_precursive_candidate(&self.chronicle, &e).is_ok_and(|v| v.authorized);
        if ok {
            self.chronicle.insert(e).expect("predecessors are present");
            Receipt::Admitted
        } else {
            self.rejected.insert(e.id());
            Receipt::Rejected
        }
    }

    /// Settles buffered events until none is ready. Returns what was settled.
    fn flush(&mut self) -> Vec<(EventId, Receipt)> {
        let mut out = Vec::new();
        loop {
            let ready = self.pending.iter().position(|(e, _)| {
                e.direct_preds()
                    .iter()
                    .all(|p| self.chronicle.contains(p) || self.rejected.contains(p))
            });
            let Some(i) = ready else {
                return out;
            };
            let (e, _) = self.pending.remove(i);
            let id = e.id();
            let receipt = if self.chronicle.contains(&id) {
                Receipt::Duplicate
            } else if e.direct_preds().iter().any(|p| self.rejected.contains(p)) {
                self.rejected.insert(id);
                Receipt::Rejected
            } else {
                self.settle(e)
            };
            out.push((id, receipt));
        }
    }
}

#[derive(Clone, Debug)]
struct Message {
    from: usize,
    to: usize,
    event: Event,
    /// The authenticated author, stamped by the network.
    origin: EntityId,
}

#[derive(Clone, Debug)]
pub struct World {
    cfg: WorldConfig,
    replicas: Vec<Replica>,
    labels: BTreeMap<String, EventId>,
    /// Keyed by (delivery tick, send sequence number).
    queue: BTreeMap<(u64, u64), Message>,
    sent: u64,
    tick: u64,
    script: Vec<ScriptedAction>,
    next_script: usize,
    logging: bool,
    rng: ChaCha8Rng,
    trace: Vec<String>,
}

impl World {
    pub fn new(cfg: WorldConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let setup = cfg.build_setup()?;
        let replicas = cfg
            .replicas
            .iter()
            .map(|(entity, byzantine)| Replica {
                entity: entity.clone(),
                byzantine: *byzantine,
                chronicle: setup.chronicle.clone(),
                pending: Vec::new(),
                rejected: BTreeSet::new(),
                omit: BTreeSet::new(),
            })
            .collect();
        let labels = setup
            .labels
            .iter()
            .map(|(k, e)| (k.clone(), e.id()))
            .collect();
        let mut script = cfg.script.clone();
        script.sort_by_key(|a| a.at);
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cfg,
            replicas,
            labels,
            queue: BTreeMap::new(),
            sent: 0,
            tick: 0,
            script,
            next_script: 0,
            logging: true,
            trace: Vec::new(),
        })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.cfg
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn replicas(&self) -> &[Replica] {
        &self.replicas
    }

    pub fn honest(&self) -> impl Iterator<Item = &Replica> {
        self.replicas.iter().filter(|r| !r.byzantine)
    }

    pub fn replica(&self, e: &EntityId) -> Option<&Replica> {
        self.replicas.iter().find(|r| &r.entity == e)
    }

    pub fn label(&self, name: &str) -> Option<EventId> {
        self.labels.get(name).copied()
    }

    pub fn labels(&self) -> &BTreeMap<String, EventId> {
        &self.labels
    }

    pub fn in_flight(&self) -> usize {
        self.queue.len()
    }

    pub fn trace(&self) -> &[String] {
        &self.trace
    }

    /// SHA-256 of the trace lines, hex-encoded.
    pub fn trace_hash(&self) -> String {
        let mut h = Sha256::new();
        for line in &self.trace {
            h.update(line.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    /// Nothing is in flight and no further action is scheduled.
    pub fn is_idle(&self) -> bool {
        self.queue.is_empty()
            && (!self.logging
                || (self.next_script == self.script.len()
                    && (!self.cfg.random_actions || self.tick >= self.cfg.max_steps)))
    }

    /// Advances one tick. Returns `false`, leaving the world unchanged, if
    /// it is idle.
    pub fn step(&mut self) -> bool {
        if self.is_idle() {
            return false;
        }
        self.tick += 1;
        self.deliver_due();
        if self.logging {
            while self
                .script
                .get(self.next_script)
                .is_some_and(|a| a.at <= self.tick)
            {
                let a = self.script[self.next_script].clone();
                self.next_script += 1;
                self.run_scripted(&a);
            }
            if self.cfg.random_actions && self.tick <= self.cfg.max_steps {
                self.random_action();
            }
        }
        true
    }

    /// Steps until `max_steps` ticks have passed or the world is idle.
    pub fn run(&mut self) {
        while self.tick < self.cfg.max_steps && self.step() {}
    }

    /// Stops new logging, delivers everything in flight, then reconciles
    /// honest replicas pairwise until no exchange changes anything.
    pub fn quiesce(&mut self) {
        self.logging = false;
        self.trace.push(format!("{} quiesce", self.tick));
        while self.step() {}
        let honest: Vec<usize> = (0..self.replicas.len())
            .filter(|&i| !self.replicas[i].byzantine)
            .collect();
        loop {
            let mut changed = false;
            for (k, &a) in honest.iter().enumerate() {
                for &b in &honest[k + 1..] {
                    changed |= self.reconcile(a, b);
                }
            }
            if !changed {
                break;
            }
        }
    }

    /// [`World::run`], [`World::quiesce`], then [`World::check_convergence`].
    pub fn run_to_convergence(&mut self) -> Option<Violation> {
        self.run();
        self.quiesce();
        self.check_convergence()
    }

    /// Both honest replicas end up with the join of their chronicles.
    /// Returns whether anything changed.
    pub fn anti_entropy(&mut self, a: &EntityId, b: &EntityId) -> Result<bool, SimError> {
        let (i, j) = (self.honest_index(a)?, self.honest_index(b)?);
        Ok(i != j && self.reconcile(i, j))
    }

    fn reconcile(&mut self, a: usize, b: usize) -> bool {
        let joined = self.replicas[a].chronicle.join(&self.replicas[b].chronicle);
        let gained = |r: &Replica| joined.len() - r.chronicle.len();
        let (ga, gb) = (gained(&self.replicas[a]), gained(&self.replicas[b]));
        let mut changed = ga + gb > 0;
        for i in [a, b] {
            let r = &mut self.replicas[i];
            for id in joined.ids() {
                r.rejected.remove(&id);
            }
            r.pending.retain(|(e, _)| !joined.contains(&e.id()));
            r.chronicle = joined.clone();
            let flushed = r.flush();
            changed |= !flushed.is_empty();
            self.trace_flushed(i, &flushed);
        }
        if ga + gb > 0 {
            self.trace.push(format!(
                "{} anti-entropy {} {} +{ga} +{gb}",
                self.tick, self.replicas[a].entity, self.replicas[b].entity
            ));
        }
        changed
    }

    /// `None` if all honest replicas hold identical chronicles, caps and
    /// values.
    pub fn check_convergence(&self) -> Option<Violation> {
        let mut honest = self.honest();
        let first = honest.next()?;
        for r in honest {
            let diff = match convergence_difference(&first.chronicle, &r.chronicle) {
                Ok(d) => d,
                Err(e) => Some(format!("chronicle cannot be evaluated: {e}")),
            };
            if let Some(detail) = diff {
                return Some(Violation {
                    other: Some(r.chronicle.clone()),
                    ..Violation::new(
                        Invariant::Convergence,
                        first.chronicle.clone(),
                        format!("{} and {}: {detail}", first.entity, r.entity),
                    )
                });
            }
        }
        None
    }

    /// Discursive verdict of `id` at each honest replica holding it.
    pub fn discursive_verdicts(&self, id: &EventId) -> Vec<(EntityId, bool)> {
        self.honest()
            .filter(|r| r.chronicle.contains(id))
            .map(|r| {
                let ok = Authorizer::new(&r.chronicle)
                    .ok()
                    .and_then(|a| a.verdict_of(id))
                    .is_some_and(|v| v.authorized);
                (r.entity.clone(), ok)
            })
            .collect()
    }

    /// `who` logs `v` at its local frontier and broadcasts it. An honest
    /// replica refuses events it would not admit. Returns the new event's id.
    pub fn log(&mut self, who: &EntityId, v: Invocation) -> Result<Option<EventId>, SimError> {
        let i = self.index(who)?;
        Ok(self.log_at(i, v, &DelaySpec::default()))
    }

    /// A Byzantine replica logs `v` with the frontier of `t` as its
    /// predecessors and broadcasts it.
    pub fn adversary_backdate(
        &mut self,
        byz: &EntityId,
        t: &Timestamp,
        v: Invocation,
    ) -> Result<EventId, SimError> {
        let i = self.byzantine_index(byz)?;
        let frontier = self.backdate_frontier(i, t)?;
        Ok(self.originate(
            i,
            "backdate",
            make_event(frontier, v),
            &DelaySpec::default(),
        ))
    }

    /// A Byzantine replica logs two events at its frontier, sending the first
    /// to `first_to` and the second to every other replica.
    pub fn adversary_equivocate(
        &mut self,
        byz: &EntityId,
        v1: Invocation,
        v2: Invocation,
        first_to: &[EntityId],
    ) -> Result<(EventId, EventId), SimError> {
        let i = self.byzantine_index(byz)?;
        let split = first_to
            .iter()
            .map(|e| self.index(e))
            .collect::<Result<BTreeSet<_>, _>>()?;
        self.equivocate_at(i, v1, v2, &split, &DelaySpec::default())
    }

    /// A Byzantine replica withholds its subsequent events from `targets`.
    pub fn adversary_omit(&mut self, byz: &EntityId, targets: &[EntityId]) -> Result<(), SimError> {
        let i = self.byzantine_index(byz)?;
        for t in targets {
            self.index(t)?;
        }
        self.set_omit(i, targets.iter().cloned().collect());
        Ok(())
    }

    fn index(&self, e: &EntityId) -> Result<usize, SimError> {
        self.replicas
            .iter()
            .position(|r| &r.entity == e)
            .ok_or_else(|| SimError::UnknownReplica(e.clone()))
    }

    fn byzantine_index(&self, e: &EntityId) -> Result<usize, SimError> {
        let i = self.index(e)?;
        if self.replicas[i].byzantine {
            Ok(i)
        } else {
            Err(SimError::NotByzantine(e.clone()))
        }
    }

    fn honest_index(&self, e: &EntityId) -> Result<usize, SimError> {
        let i = self.index(e)?;
        if self.replicas[i].byzantine {
            Err(SimError::NotHonest(e.clone()))
        } else {
            Ok(i)
        }
    }

    fn backdate_frontier(&self, i: usize, t: &Timestamp) -> Result<BTreeSet<EventId>, SimError> {
        let g = &self.replicas[i].chronicle;
        let creation = g.creation().map_err(|_| SimError::InvalidTimestamp)?;
        if !t.is_valid_in(g) || !t.contains(&creation.id()) {
            return Err(SimError::InvalidTimestamp);
        }
        Ok(g.frontier(t))
    }

    fn set_omit(&mut self, i: usize, targets: BTreeSet<EntityId>) {
        let names: Vec<&str> = targets.iter().map(EntityId::as_str).collect();
        self.trace.push(format!(
            "{} omit {} {}",
            self.tick,
            self.replicas[i].entity,
            if names.is_empty() {
                "none".to_owned()
            } else {
                names.join(",")
            }
        ));
        self.replicas[i].omit = targets;
    }

    fn log_at(&mut self, i: usize, v: Invocation, delay: &DelaySpec) -> Option<EventId> {
        let r = &self.replicas[i];
        let e = make_event(r.chronicle.heads(), v);
        if !r.byzantine
            && !authorizes_precursive_candidate(&r.chronicle, &e).is_ok_and(|v| v.authorized)
        {
            self.trace.push(format!(
                "{} refuse {} {}",
                self.tick,
                r.entity,
                e.id().short()
            ));
            return None;
        }
        Some(self.originate(i, "log", e, delay))
    }

    /// Stores a replica's own event and sends it to every replica it does
    /// not withhold from.
    fn originate(&mut self, i: usize, kind: &str, e: Event, delay: &DelaySpec) -> EventId {
        let to: BTreeSet<usize> = (0..self.replicas.len())
            .filter(|&j| j != i && !self.replicas[i].omit.contains(&self.replicas[j].entity))
            .collect();
        self.originate_to(i, kind, e, &to, delay)
    }

    fn originate_to(
        &mut self,
        i: usize,
        kind: &str,
        e: Event,
        to: &BTreeSet<usize>,
        delay: &DelaySpec,
    ) -> EventId {
        let id = e.id();
        self.trace.push(format!(
            "{} {kind} {} {}",
            self.tick,
            self.replicas[i].entity,
            id.short()
        ));
        self.replicas[i]
            .chronicle
            .insert(e.clone())
            .expect("own events have present predecessors");
        for &j in to {
            if j != i {
                self.send(i, j, &e, delay);
            }
        }
        id
    }

    fn send(&mut self, from: usize, to: usize, e: &Event, delay: &DelaySpec) {
        let recipient = &self.replicas[to].entity;
        let d = match delay.for_recipient(recipient) {
            Some(d) => d,
            None => {
                if self.cfg.drop_rate > 0.0 && self.rng.gen_bool(self.cfg.drop_rate) {
                    self.trace.push(format!(
                        "{} drop {}->{} {}",
                        self.tick,
                        self.replicas[from].entity,
                        recipient,
                        e.id().short()
                    ));
                    return;
                }
                self.rng.gen_range(0..=self.cfg.max_delay)
            }
        };
        self.sent += 1;
        self.queue.insert(
            (self.tick + 1 + d, self.sent),
            Message {
                from,
                to,
                event: e.clone(),
                origin: self.replicas[from].entity.clone(),
            },
        );
    }

    fn deliver_due(&mut self) {
        while let Some(entry) = self.queue.first_entry() {
            if entry.key().0 > self.tick {
                break;
            }
            let m = entry.remove();
            let id = m.event.id();
            let r = &mut self.replicas[m.to];
            let receipt = r.receive(m.event, m.origin);
            let flushed = if receipt == Receipt::Admitted {
                r.flush()
            } else {
                Vec::new()
            };
            self.trace.push(format!(
                "{} deliver {}->{} {} {}",
                self.tick,
                self.replicas[m.from].entity,
                self.replicas[m.to].entity,
                id.short(),
                receipt.as_str()
            ));
            self.trace_flushed(m.to, &flushed);
        }
    }

    fn trace_flushed(&mut self, i: usize, flushed: &[(EventId, Receipt)]) {
        for (id, receipt) in flushed {
            self.trace.push(format!(
                "{} flush {} {} {}",
                self.tick,
                self.replicas[i].entity,
                id.short(),
                receipt.as_str()
            ));
        }
    }

    fn equivocate_at(
        &mut self,
        i: usize,
        v1: Invocation,
        v2: Invocation,
        split: &BTreeSet<usize>,
        delay: &DelaySpec,
    ) -> Result<(EventId, EventId), SimError> {
        let frontier = self.replicas[i].chronicle.heads();
        let e1 = make_event(frontier.clone(), v1);
        let e2 = make_event(frontier, v2);
        if e1 == e2 {
            return Err(SimError::IdenticalEvents);
        }
        let omit = &self.replicas[i].omit;
        let (first, second): (BTreeSet<usize>, BTreeSet<usize>) = (0..self.replicas.len())
            .filter(|&j| j != i && !omit.contains(&self.replicas[j].entity))
            .partition(|j| split.contains(j));
        let a = self.originate_to(i, "equivocate", e1, &first, delay);
        let b = self.originate_to(i, "equivocate", e2, &second, delay);
        Ok((a, b))
    }

    fn resolve(&self, r: &EventRef) -> Option<EventId> {
        match r {
            EventRef::Label(l) => self.labels.get(l).copied(),
            EventRef::Id(id) => Some(*id),
            EventRef::Unknown => Some(UNKNOWN_ID),
        }
    }

    fn instantiate(&self, sbj: &EntityId, spec: &InvocationSpec) -> Option<Invocation> {
        Some(match spec {
            InvocationSpec::Assign { claim, name } => {
                mk_assign(sbj.clone(), self.resolve(claim)?, name.clone())
            }
            InvocationSpec::Grant { claim, cap, obj } => {
                let claim = match claim {
                    Some(c) => Some(self.resolve(c)?),
                    None => None,
                };
                mk_grant(sbj.clone(), claim, *cap, obj.clone())
            }
            InvocationSpec::Revoke { claim, target } => {
                mk_revoke(sbj.clone(), self.resolve(claim)?, self.resolve(target)?)
            }
        })
    }

    fn skip(&mut self, a: &ScriptedAction, why: &str) {
        self.trace
            .push(format!("{} skip {} {why}", self.tick, a.actor));
    }

    fn run_scripted(&mut self, a: &ScriptedAction) {
        let i = self.index(&a.actor).expect("validated");
        let created: Vec<EventId> = match &a.action {
            Action::Log(spec) => {
                let Some(v) = self.instantiate(&a.actor, spec) else {
                    return self.skip(a, "unresolved-label");
                };
                self.log_at(i, v, &a.delay).into_iter().collect()
            }
            Action::Backdate { after, inv } => {
                let (Some(v), Some(ids)) = (
                    self.instantiate(&a.actor, inv),
                    after
                        .iter()
                        .map(|r| self.resolve(r))
                        .collect::<Option<Vec<_>>>(),
                ) else {
                    return self.skip(a, "unresolved-label");
                };
                let t = self.replicas[i].chronicle.closure(ids);
                match self.backdate_frontier(i, &t) {
                    Ok(frontier) => {
                        vec![self.originate(i, "backdate", make_event(frontier, v), &a.delay)]
                    }
                    Err(_) => return self.skip(a, "invalid-timestamp"),
                }
            }
            Action::Equivocate {
                first,
                second,
                split,
            } => {
                let (Some(v1), Some(v2)) = (
                    self.instantiate(&a.actor, first),
                    self.instantiate(&a.actor, second),
                ) else {
                    return self.skip(a, "unresolved-label");
                };
                let split = split
                    .iter()
                    .map(|e| self.index(e).expect("validated"))
                    .collect();
                match self.equivocate_at(i, v1, v2, &split, &a.delay) {
                    Ok((x, y)) => vec![x, y],
                    Err(_) => return self.skip(a, "identical-events"),
                }
            }
            Action::Omit(targets) => {
                self.set_omit(i, targets.iter().cloned().collect());
                Vec::new()
            }
        };
        for (label, id) in a.labels.iter().zip(created) {
            self.labels.insert(label.clone(), id);
        }
    }

    fn random_action(&mut self) {
        if !self.rng.gen_bool(ACTIVITY) {
            return;
        }
        let i = self.rng.gen_range(0..self.replicas.len());
        let entities: Vec<EntityId> = self.cfg.entities().cloned().collect();
        let me = self.replicas[i].entity.clone();
        let none = DelaySpec::default();
        if !self.replicas[i].byzantine {
            let options =
                honest_options(&self.replicas[i].chronicle, &me, &entities, &mut self.rng);
            if let Some(v) = options.choose(&mut self.rng).cloned() {
                self.log_at(i, v, &none);
            }
            return;
        }
        let g = self.replicas[i].chronicle.clone();
        if !g.valid() {
            return;
        }
        match self.rng.gen_range(0..10) {
            0..=2 => {
                let v = forged_invocation(&g, &me, &entities, &mut self.rng);
                self.originate(i, "log", make_event(g.heads(), v), &none);
            }
            3..=5 => {
                let frontier = backdated_frontier(&g, &mut self.rng);
                let v = forged_invocation(&g, &me, &entities, &mut self.rng);
                self.originate(i, "backdate", make_event(frontier, v), &none);
            }
            6..=8 => {
                let v1 = forged_invocation(&g, &me, &entities, &mut self.rng);
                let v2 = forged_invocation(&g, &me, &entities, &mut self.rng);
                let split = (0..self.replicas.len())
                    .filter(|_| self.rng.gen_bool(0.5))
                    .collect();
                let _ = self.equivocate_at(i, v1, v2, &split, &none);
            }
            _ => {
                let targets = entities
                    .iter()
                    .filter(|e| **e != me && self.rng.gen_bool(0.3))
                    .cloned()
                    .collect();
                self.set_omit(i, targets);
            }
        }
    }
}
