//! Falsification campaigns: every checker over enumerated and generated
//! chronicles.
//!
//! A [`Campaign`] either stops at the first violation or, with
//! [`Campaign::keep_going`], records the first violation of each invariant and
//! counts the rest.

use std::collections::BTreeMap;
use std::ops::{AddAssign, ControlFlow, Range};

use crate::chronicle::GroupChronicle;
use crate::event::{Event, Invocation};
use crate::oracle::check::{
    check_oracle_equivalence_evaluated, check_precursive_equivalence,
    check_revocation_safety_evaluated, CheckError, Evaluated, Extended, Invariant, Violation,
};
use crate::oracle::enumerate::{extra_budget, for_each_extension, Alphabet};
use crate::oracle::generate::{gen_traced, GenConfig};
use crate::preset::{build_preset, PolicyPreset};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CampaignStats {
    /// Distinct chronicles checked.
    pub chronicles: u64,
    /// `(G, e_m)` pairs run through the authorization- and query-safety
    /// checkers.
    pub extensions: u64,
    /// Member verdicts compared between the two evaluators.
    pub oracle_events: u64,
    /// Invocations run through the revocation-safety checker.
    pub revocation_probes: u64,
}

impl AddAssign for CampaignStats {
    fn add_assign(&mut self, o: Self) {
        self.chronicles += o.chronicles;
        self.extensions += o.extensions;
        self.oracle_events += o.oracle_events;
        self.revocation_probes += o.revocation_probes;
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CampaignError {
    #[error("{0}")]
    Violation(Box<Violation>),
    #[error(transparent)]
    Check(#[from] CheckError),
}

/// The first violation of an invariant and where it was found.
#[derive(Clone, Debug)]
pub struct Finding {
    pub location: String,
    pub violation: Violation,
}

#[derive(Clone, Debug, Default)]
pub struct Campaign {
    pub stats: CampaignStats,
    pub counts: BTreeMap<Invariant, u64>,
    pub first: BTreeMap<Invariant, Finding>,
    keep_going: bool,
    location: String,
}

impl Campaign {
    /// Stops at the first violation.
    pub fn new() -> Self {
        Self::default()
    }

    /// Records violations and carries on.
    pub fn keep_going() -> Self {
        Self {
            keep_going: true,
            ..Self::default()
        }
    }

    pub fn violations(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn count(&self, i: Invariant) -> u64 {
        self.counts.get(&i).copied().unwrap_or(0)
    }

    fn found(&mut self, v: Option<Violation>) -> Result<(), CampaignError> {
        let Some(v) = v else {
            return Ok(());
        };
        *self.counts.entry(v.invariant).or_default() += 1;
        if !self.keep_going {
            return Err(CampaignError::Violation(Box::new(v)));
        }
        let location = self.location.clone();
        self.first.entry(v.invariant).or_insert(Finding {
            location,
            violation: v,
        });
        Ok(())
    }

    /// Authorization and query safety for `parent ∪ {e}`, plus agreement of
    /// the two readings of query safety's consequent.
    pub fn check_extension(
        &mut self,
        parent: &GroupChronicle,
        e: &Event,
    ) -> Result<(), CampaignError> {
        self.check_extension_from(&Evaluated::new(parent)?, e)
            .map(drop)
    }

    /// [`Campaign::check_extension`] on an evaluated parent. Returns the
    /// evaluated extension.
    pub fn check_extension_from(
        &mut self,
        parent: &Evaluated,
        e: &Event,
    ) -> Result<Evaluated, CampaignError> {
        self.stats.extensions += 1;
        let x = Extended::from_evaluated(parent, e)?;
        self.found(x.authorization_safety())?;
        self.found(x.query_safety())?;
        self.found(x.consequent_agreement())?;
        Ok(x.into_after())
    }

    /// Evaluator agreement on every member and revocation safety for each
    /// probe.
    pub fn check_chronicle(
        &mut self,
        g: &GroupChronicle,
        probes: &[Invocation],
    ) -> Result<(), CampaignError> {
        self.check_evaluated(&Evaluated::new(g)?, probes)
    }

    fn check_evaluated(
        &mut self,
        ev: &Evaluated,
        probes: &[Invocation],
    ) -> Result<(), CampaignError> {
        self.stats.chronicles += 1;
        self.stats.oracle_events += ev.g.len() as u64;
        self.stats.revocation_probes += probes.len() as u64;
        self.found(check_oracle_equivalence_evaluated(ev)?)?;
        self.found(check_revocation_safety_evaluated(ev, probes))
    }

    /// Every checker on an arbitrary valid chronicle: each post-creation
    /// member, in topological order, is checked as an extension of the members
    /// before it, and the chronicle is probed with the invocations of those
    /// members.
    pub fn check_whole_chronicle(&mut self, g: &GroupChronicle) -> Result<(), CampaignError> {
        let creation = g.creation().map_err(CheckError::from)?;
        let setup = g.tme(&creation).map_err(CheckError::from)?;
        let order = g.topological();
        let base: GroupChronicle = order
            .iter()
            .filter(|e| **e == creation || setup.contains(&e.id()))
            .cloned()
            .collect::<Result<_, _>>()
            .map_err(CheckError::from)?;
        let mut parent = Evaluated::new(&base)?;
        let mut probes: Vec<Invocation> = Vec::new();
        for e in order {
            if parent.g.contains(&e.id()) {
                continue;
            }
            parent = self.check_extension_from(&parent, &e)?;
            if !probes.contains(e.voc()) {
                probes.push(e.voc().clone());
            }
        }
        self.check_evaluated(&parent, &probes)
    }

    /// Every chronicle of at most `max_total_events` events enumerated from
    /// the preset: each extension step is checked, and each distinct
    /// chronicle is checked against the whole invocation alphabet.
    pub fn enumeration(
        &mut self,
        preset: &PolicyPreset,
        max_total_events: usize,
    ) -> Result<(), CampaignError> {
        self.location = format!("enumeration {} ≤{max_total_events}", preset.kind());
        let alphabet = Alphabet::for_preset(preset);
        let base = build_preset(preset);
        self.check_chronicle(&base, &alphabet.invocations(&base))?;
        // Extensions arrive grouped by parent, so one evaluation of the
        // parent serves the whole group.
        let mut parent: Option<Evaluated> = None;
        let flow = for_each_extension(preset, extra_budget(preset, max_total_events), |x| {
            let mut step = || -> Result<(), CampaignError> {
                let stale = parent.as_ref().map_or(true, |p| {
                    p.g.len() != x.parent.len() || !p.g.ids().eq(x.parent.ids())
                });
                if stale {
                    parent = Some(Evaluated::new(x.parent)?);
                }
                let child =
                    self.check_extension_from(parent.as_ref().expect("set above"), x.event)?;
                if x.first {
                    self.check_evaluated(&child, &alphabet.invocations(x.child))?;
                }
                Ok(())
            };
            let step = step();
            match step {
                Ok(()) => ControlFlow::Continue(()),
                Err(e) => ControlFlow::Break(e),
            }
        });
        match flow {
            ControlFlow::Continue(()) => Ok(()),
            ControlFlow::Break(e) => Err(e),
        }
    }

    /// One generated chronicle: each generation step is checked as an
    /// extension, the final chronicle is probed with the invocation of every
    /// event added after setup, and the windowed precursive evaluator is
    /// compared with the literal one.
    pub fn generated_case(&mut self, cfg: &GenConfig) -> Result<(), CampaignError> {
        self.location = format!("{} seed {}", cfg.preset.kind(), cfg.seed);
        let out = gen_traced(cfg);
        let mut g = Evaluated::new(&out.setup)?;
        let mut probes: Vec<Invocation> = Vec::new();
        for step in &out.steps {
            g = self.check_extension_from(&g, &step.event)?;
            if !probes.contains(step.event.voc()) {
                probes.push(step.event.voc().clone());
            }
        }
        self.check_evaluated(&g, &probes)?;
        self.found(check_precursive_equivalence(&out.chronicle)?)
    }

    /// [`Campaign::generated_case`] for each seed in order. On failure the
    /// seed is returned with the error.
    pub fn generated_seeds(
        &mut self,
        template: &GenConfig,
        seeds: Range<u64>,
    ) -> Result<(), (u64, CampaignError)> {
        for seed in seeds {
            let cfg = GenConfig {
                seed,
                ..template.clone()
            };
            self.generated_case(&cfg).map_err(|e| (seed, e))?;
        }
        Ok(())
    }
}
