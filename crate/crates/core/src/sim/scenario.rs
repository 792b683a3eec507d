//! Line-oriented scenario files.
//!
//! ```text
//! # comment
//! seed 7
//! replicas A B C
//! byzantine C
//! creator A                     # custom setup: creator plus labeled grants
//! grant g_c assign C
//! grant g_b revoke B
//! # or: preset allow-revoke-later  (first replica creates)
//! drop-rate 0.1
//! max-delay 2
//! max-steps 20
//! random off
//! at 1 C assign g_c x as a delay 0
//! at 2 B revoke g_b g_c as rv delay 0 A=8
//! at 4 C backdate after a assign g_c z as bd delay 0
//! at 5 C equivocate assign g_c p assign g_c q split A as p,q
//! at 6 C omit B
//! expect values none
//! expect disagreement bd
//! ```
//!
//! Event references are labels (setup grants or earlier `as` labels),
//! `unknown`, or a 64-digit hex id. Preset setups label their grants
//! `g.assign.<entity>`, `g.grant.<entity>` and `g.revoke.<entity>`; every
//! setup labels its create event `create`.

use std::collections::BTreeSet;
use std::fmt;

use crate::auth::Authorizer;
use crate::ids::{Capability, EntityId, EventId};
use crate::oracle::check::Violation;
use crate::preset::PresetKind;
use crate::sim::{
    Action, DelaySpec, EventRef, InvocationSpec, ScriptedAction, SetupSpec, SimError, World,
    WorldConfig,
};

const DEFAULT_MAX_STEPS: u64 = 50;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScenarioError {
    /// 1-based line, if the problem is tied to one.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "line {n}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ScenarioError {}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expectation {
    /// Final values at every honest replica are exactly these labeled events.
    Values(Vec<String>),
    /// Two honest replicas disagree on the discursive verdict of the labeled
    /// event at some tick, and all honest replicas agree after quiescing.
    Disagreement(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub config: WorldConfig,
    pub expectations: Vec<Expectation>,
}

struct Parser {
    line: usize,
}

impl Parser {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, ScenarioError> {
        Err(ScenarioError {
            line: Some(self.line),
            message: message.into(),
        })
    }

    fn entity(&self, s: &str) -> Result<EntityId, ScenarioError> {
        EntityId::new(s).or_else(|e| self.err(e.to_string()))
    }

    fn entities(&self, s: &str) -> Result<Vec<EntityId>, ScenarioError> {
        if s == "none" {
            return Ok(Vec::new());
        }
        s.split(',').map(|e| self.entity(e)).collect()
    }

    fn number<T: std::str::FromStr>(
        &self,
        field: &str,
        s: Option<&str>,
    ) -> Result<T, ScenarioError> {
        match s.map(str::parse) {
            Some(Ok(v)) => Ok(v),
            _ => self.err(format!("{field} expects a number")),
        }
    }

    fn cap(&self, s: &str) -> Result<Capability, ScenarioError> {
        s.parse()
            .or_else(|_| self.err(format!("unknown capability {s:?}")))
    }

    fn event_ref(&self, s: &str) -> EventRef {
        if s == "unknown" {
            EventRef::Unknown
        } else if let Ok(id) = EventId::from_hex(s) {
            EventRef::Id(id)
        } else {
            EventRef::Label(s.to_owned())
        }
    }

    fn invocation<'a>(
        &self,
        toks: &mut impl Iterator<Item = &'a str>,
    ) -> Result<InvocationSpec, ScenarioError> {
        let mut next = |what: &str| {
            toks.next()
                .map_or_else(|| self.err(format!("missing {what}")), Ok)
        };
        match next("invocation")? {
            "assign" => Ok(InvocationSpec::Assign {
                claim: self.event_ref(next("claim")?),
                name: next("name")?.to_owned(),
            }),
            "grant" => {
                let claim = match next("claim")? {
                    "none" => None,
                    c => Some(self.event_ref(c)),
                };
                Ok(InvocationSpec::Grant {
                    claim,
                    cap: self.cap(next("capability")?)?,
                    obj: self.entity(next("object")?)?,
                })
            }
            "revoke" => Ok(InvocationSpec::Revoke {
                claim: self.event_ref(next("claim")?),
                target: self.event_ref(next("target")?),
            }),
            other => self.err(format!("unknown invocation {other:?}")),
        }
    }

    fn action(&self, rest: &[&str]) -> Result<ScriptedAction, ScenarioError> {
        let mut toks = rest.iter().copied().peekable();
        let at: u64 = self.number("at", toks.next())?;
        if at == 0 {
            return self.err("actions start at tick 1");
        }
        let actor = match toks.next() {
            Some(a) => self.entity(a)?,
            None => return self.err("missing actor"),
        };
        let action = match toks.peek().copied() {
            Some("backdate") => {
                toks.next();
                if toks.next() != Some("after") {
                    return self.err("backdate expects `after <labels>`");
                }
                let after = match toks.next() {
                    Some(s) => s.split(',').map(|r| self.event_ref(r)).collect(),
                    None => return self.err("missing backdate timestamp"),
                };
                Action::Backdate {
                    after,
                    inv: self.invocation(&mut toks)?,
                }
            }
            Some("equivocate") => {
                toks.next();
                let first = self.invocation(&mut toks)?;
                let second = self.invocation(&mut toks)?;
                let split = if toks.peek() == Some(&"split") {
                    toks.next();
                    match toks.next() {
                        Some(s) => self.entities(s)?,
                        None => return self.err("missing split entities"),
                    }
                } else {
                    Vec::new()
                };
                Action::Equivocate {
                    first,
                    second,
                    split,
                }
            }
            Some("omit") => {
                toks.next();
                match toks.next() {
                    Some(s) => Action::Omit(self.entities(s)?),
                    None => return self.err("missing omit targets"),
                }
            }
            _ => Action::Log(self.invocation(&mut toks)?),
        };
        let mut labels = Vec::new();
        let mut delay = DelaySpec::default();
        while let Some(opt) = toks.next() {
            match opt {
                "as" => match toks.next() {
                    Some(s) => labels = s.split(',').map(str::to_owned).collect(),
                    None => return self.err("missing label after `as`"),
                },
                "delay" => {
                    let mut any = false;
                    while let Some(s) = toks.next_if(|t| *t != "as" && *t != "delay") {
                        any = true;
                        match s.split_once('=') {
                            Some((e, d)) => {
                                let d = self.number("delay", Some(d))?;
                                delay.per.insert(self.entity(e)?, d);
                            }
                            None => delay.all = Some(self.number("delay", Some(s))?),
                        }
                    }
                    if !any {
                        return self.err("missing delay value");
                    }
                }
                other => return self.err(format!("unexpected {other:?}")),
            }
        }
        let creates = match &action {
            Action::Log(_) | Action::Backdate { .. } => 1,
            Action::Equivocate { .. } => 2,
            Action::Omit(_) => 0,
        };
        if labels.len() > creates {
            return self.err(format!("action creates {creates} event(s)"));
        }
        Ok(ScriptedAction {
            at,
            actor,
            action,
            labels,
            delay,
        })
    }
}

fn refs(spec: &InvocationSpec) -> Vec<&EventRef> {
    match spec {
        InvocationSpec::Assign { claim, .. } => vec![claim],
        InvocationSpec::Grant { claim, .. } => claim.iter().collect(),
        InvocationSpec::Revoke { claim, target } => vec![claim, target],
    }
}

fn action_refs(a: &Action) -> Vec<&EventRef> {
    match a {
        Action::Log(v) => refs(v),
        Action::Backdate { after, inv } => after.iter().chain(refs(inv)).collect(),
        Action::Equivocate { first, second, .. } => {
            refs(first).into_iter().chain(refs(second)).collect()
        }
        Action::Omit(_) => Vec::new(),
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut p = Parser { line: 0 };
    let mut seed = 0;
    let mut replicas: Vec<EntityId> = Vec::new();
    let mut byzantine: Vec<(usize, EntityId)> = Vec::new();
    let mut preset = None;
    let mut creator = None;
    let mut grants = Vec::new();
    let mut drop_rate = 0.0;
    let mut max_delay = 0;
    let mut max_steps = DEFAULT_MAX_STEPS;
    let mut random_actions = false;
    let mut script: Vec<(usize, ScriptedAction)> = Vec::new();
    let mut expectations = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        p.line = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let toks: Vec<&str> = line.split_whitespace().collect();
        let Some((&key, rest)) = toks.split_first() else {
            continue;
        };
        let one = |p: &Parser| match rest {
            [v] => Ok(*v),
            _ => p.err(format!("{key} expects one value")),
        };
        match key {
            "seed" => seed = p.number("seed", Some(one(&p)?))?,
            "replicas" => {
                if rest.is_empty() {
                    return p.err("replicas expects at least one name");
                }
                replicas = rest.iter().map(|e| p.entity(e)).collect::<Result<_, _>>()?;
            }
            "byzantine" => {
                for e in rest {
                    byzantine.push((p.line, p.entity(e)?));
                }
            }
            "preset" => {
                let v = one(&p)?;
                preset = Some(v.parse::<PresetKind>().or_else(|e| p.err(e))?);
            }
            "creator" => creator = Some(p.entity(one(&p)?)?),
            "grant" => match rest {
                [label, cap, obj] => {
                    grants.push((label.to_string(), p.cap(cap)?, p.entity(obj)?));
                }
                _ => return p.err("grant expects <label> <capability> <object>"),
            },
            "drop-rate" => {
                drop_rate = p.number("drop-rate", Some(one(&p)?))?;
                if !(0.0..=1.0).contains(&drop_rate) {
                    return p.err("drop-rate must be within [0, 1]");
                }
            }
            "max-delay" => max_delay = p.number("max-delay", Some(one(&p)?))?,
            "max-steps" => max_steps = p.number("max-steps", Some(one(&p)?))?,
            "random" => {
                random_actions = match one(&p)? {
                    "on" => true,
                    "off" => false,
                    _ => return p.err("random expects on or off"),
                }
            }
            "at" => {
                let a = p.action(rest)?;
                if script.last().is_some_and(|(_, prev)| prev.at > a.at) {
                    return p.err("actions must be listed in tick order");
                }
                script.push((p.line, a));
            }
            "expect" => expectations.push(match rest {
                ["values", "none"] => Expectation::Values(Vec::new()),
                ["values", labels @ ..] if !labels.is_empty() => {
                    Expectation::Values(labels.iter().map(|l| l.to_string()).collect())
                }
                ["disagreement", label] => Expectation::Disagreement(label.to_string()),
                _ => return p.err("expect takes `values <labels>|none` or `disagreement <label>`"),
            }),
            other => return p.err(format!("unknown field {other:?}")),
        }
    }
    let whole = |message: String| ScenarioError {
        line: None,
        message,
    };
    if replicas.is_empty() {
        return Err(whole("missing `replicas`".into()));
    }
    let mut roster: Vec<(EntityId, bool)> = replicas.into_iter().map(|e| (e, false)).collect();
    for (line, b) in byzantine {
        match roster.iter_mut().find(|(e, _)| *e == b) {
            Some(slot) => slot.1 = true,
            None => {
                return Err(ScenarioError {
                    line: Some(line),
                    message: format!("{b} is not a replica"),
                })
            }
        }
    }
    let setup = match (preset, creator) {
        (Some(_), Some(_)) => return Err(whole("`preset` and `creator` are exclusive".into())),
        (Some(kind), None) if grants.is_empty() => SetupSpec::Preset(kind),
        (Some(_), None) => return Err(whole("`grant` lines need `creator`".into())),
        (None, Some(creator)) => SetupSpec::Custom { creator, grants },
        (None, None) => return Err(whole("missing `preset` or `creator`".into())),
    };
    let config = WorldConfig {
        replicas: roster,
        setup,
        drop_rate,
        max_delay,
        script: Vec::new(),
        random_actions,
        seed,
        max_steps,
    };
    let setup = config.build_setup().map_err(|e| whole(e.to_string()))?;
    let mut defined: BTreeSet<String> = setup.labels.keys().cloned().collect();
    for (line, a) in &script {
        let at_line = |message: String| ScenarioError {
            line: Some(*line),
            message,
        };
        if a.at > max_steps {
            return Err(at_line(format!(
                "tick {} is past max-steps {max_steps}",
                a.at
            )));
        }
        for r in action_refs(&a.action) {
            if let EventRef::Label(l) = r {
                if !defined.contains(l) {
                    return Err(at_line(format!("label {l:?} is not defined earlier")));
                }
            }
        }
        for l in &a.labels {
            if !defined.insert(l.clone()) {
                return Err(at_line(format!("label {l:?} is defined twice")));
            }
        }
        let mut single = config.clone();
        single.script = vec![a.clone()];
        single.validate().map_err(|e| at_line(e.to_string()))?;
    }
    for x in &expectations {
        let labels = match x {
            Expectation::Values(ls) => ls.clone(),
            Expectation::Disagreement(l) => vec![l.clone()],
        };
        if let Some(l) = labels.iter().find(|l| !defined.contains(*l)) {
            return Err(whole(format!("expectation names undefined label {l:?}")));
        }
    }
    Ok(Scenario {
        config: WorldConfig {
            script: script.into_iter().map(|(_, a)| a).collect(),
            ..config
        },
        expectations,
    })
}

/// Outcome of running a scenario to completion.
pub struct ScenarioRun {
    pub world: World,
    pub convergence: Option<Violation>,
    /// Unmet expectations, described.
    pub failures: Vec<String>,
}

/// Runs to `max_steps`, quiesces and checks convergence and the scenario's
/// expectations.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioRun, SimError> {
    let mut world = World::new(s.config.clone())?;
    let watched: Vec<&String> = s
        .expectations
        .iter()
        .filter_map(|x| match x {
            Expectation::Disagreement(l) => Some(l),
            _ => None,
        })
        .collect();
    let mut disagreed: BTreeSet<&String> = BTreeSet::new();
    let mut observe = |w: &World| {
        for l in &watched {
            if let Some(id) = w.label(l) {
                let vs = w.discursive_verdicts(&id);
                if vs.iter().any(|(_, v)| *v) && vs.iter().any(|(_, v)| !*v) {
                    disagreed.insert(*l);
                }
            }
        }
    };
    while world.tick() < s.config.max_steps && world.step() {
        observe(&world);
    }
    world.quiesce();
    let convergence = world.check_convergence();
    let mut failures = Vec::new();
    for x in &s.expectations {
        match x {
            Expectation::Values(labels) => {
                let want: BTreeSet<Option<EventId>> =
                    labels.iter().map(|l| world.label(l)).collect();
                for r in world.honest() {
                    let got: BTreeSet<Option<EventId>> = Authorizer::new(r.chronicle())
                        .map(|a| a.values().iter().map(|e| Some(e.id())).collect())
                        .unwrap_or_default();
                    if got != want {
                        failures.push(format!(
                            "values at {} are not {{{}}}",
                            r.entity(),
                            labels.join(", ")
                        ));
                    }
                }
            }
            Expectation::Disagreement(l) => {
                if !disagreed.contains(l) {
                    failures.push(format!("honest replicas never disagreed on {l}"));
                }
                let honest = world.honest().count();
                let vs = world.label(l).map(|id| world.discursive_verdicts(&id));
                let settled = vs
                    .as_ref()
                    .is_some_and(|vs| vs.len() == honest && vs.iter().all(|(_, v)| *v == vs[0].1));
                if !settled {
                    failures.push(format!(
                        "honest replicas do not agree on {l} after quiescing"
                    ));
                }
            }
        }
    }
    Ok(ScenarioRun {
        world,
        convergence,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    const S3: &str = "\
seed 1
replicas A B C
byzantine C
creator A
grant g_c assign C
grant g_b revoke B
max-steps 12
at 1 C assign g_c x as a delay 0
at 2 B revoke g_b g_c as rv delay 0 A=8
at 4 C backdate after a assign g_c z as bd delay 0
expect values a
expect disagreement bd
";

    #[test]
    fn backdating_anomaly_appears_then_resolves() {
        let s = parse_scenario(S3).unwrap();
        let run = run_scenario(&s).unwrap();
        assert_eq!(run.convergence, None);
        assert!(run.failures.is_empty(), "{:?}", run.failures);
        let bd = run.world.label("bd").unwrap();
        let f = fixtures::s3();
        assert_eq!(bd, f.backdated.id());
        assert!(run.world.discursive_verdicts(&bd).iter().all(|(_, v)| !v));
    }

    #[test]
    fn errors_name_the_line() {
        let e = parse_scenario("replicas A B\npreset allow-on-creation\nat 1 A frobnicate\n")
            .unwrap_err();
        assert_eq!(e.line, Some(3));
        let e = parse_scenario("replicas A B\npreset nope\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e =
            parse_scenario("replicas A B\npreset allow-on-creation\nat 1 A omit B\n").unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.message.contains("not Byzantine"));
        let e = parse_scenario("replicas A\npreset allow-on-creation\nat 1 A assign later x\n")
            .unwrap_err();
        assert!(e.message.contains("not defined"));
        assert!(parse_scenario("preset allow-on-creation\n").is_err());
    }

    #[test]
    fn preset_labels_are_available() {
        let s = parse_scenario(
            "replicas A B\npreset allow-revoke-later\n\
             at 1 B assign g.assign.B x as b\n\
             at 3 A revoke g.revoke.A g.assign.B\nexpect values b\n",
        )
        .unwrap();
        let run = run_scenario(&s).unwrap();
        assert!(run.failures.is_empty(), "{:?}", run.failures);
    }
}
