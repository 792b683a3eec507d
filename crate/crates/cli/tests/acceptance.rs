//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! fails.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use chronicap_core::auth::RevocationScope;
use chronicap_core::fixtures::{self, all_fixture_events, entity};
use chronicap_core::oracle::campaign::Campaign;
use chronicap_core::oracle::check::check_revocation_safety_with;
use chronicap_core::oracle::lattice::{join_law_failure, sample_triple};
use chronicap_core::oracle::witness::{decode_witness, encode_witness, replay};
use chronicap_core::oracle::{Alphabet, GenConfig, Invariant};
use chronicap_core::sim::scenario::{parse_scenario, run_scenario};
use chronicap_core::sim::{World, WorldConfig};
use chronicap_core::{
    authorizes, caps, encode_event, values, Authorizer, Capability, EntityId, Event, EventId,
    PolicyPreset, PresetKind,
};

const ENUMERATION_TOTAL_EVENTS: usize = 8;
/// Deny-grant-later reaches 44 million distinct chronicles at 8 events, about
/// 40 minutes of checking; by default it stops at 7. Set
/// `CHRONICAP_FULL_ENUMERATION=1` for the full bound.
const DENY_GRANT_LATER_DEFAULT_TOTAL: usize = 7;
const GENERATED_SEEDS: u64 = 10_000;
const SIM_SEEDS_PER_CONFIG: u64 = 8;
const LATTICE_TRIPLES: u64 = 10_000;

type Outcome = Result<String, String>;

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn ids(es: Vec<Event>) -> BTreeSet<EventId> {
    es.iter().map(Event::id).collect()
}

fn ensure(ok: bool, what: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn fixture_semantics() -> Outcome {
    let t = Instant::now();
    let (f1, f2, f3) = (fixtures::s1(), fixtures::s2(), fixtures::s3());
    let err = |e: chronicap_core::ChronicleError| e.to_string();
    ensure(
        !authorizes(&f1.chronicle, &f1.a).map_err(err)?.authorized,
        "S1: a is authorized",
    )?;
    ensure(
        values(&f1.chronicle).map_err(err)?.is_empty(),
        "S1: values not empty",
    )?;
    ensure(
        ids(caps(&f1.chronicle).map_err(err)?) == BTreeSet::from([f1.g_b.id()]),
        "S1: caps differ from {g_B}",
    )?;
    ensure(
        !authorizes(&f2.chronicle, &f2.a).map_err(err)?.authorized,
        "S2: a is authorized",
    )?;
    ensure(
        authorizes(&f2.chronicle, &f2.b).map_err(err)?.authorized,
        "S2: b is unauthorized",
    )?;
    ensure(
        ids(values(&f2.chronicle).map_err(err)?) == BTreeSet::from([f2.b.id()]),
        "S2: values differ from {b}",
    )?;
    ensure(
        ids(caps(&f2.chronicle).map_err(err)?) == BTreeSet::from([f2.g1.id(), f2.g3.id()]),
        "S2: caps differ from {g1, g3}",
    )?;
    ensure(
        !authorizes(&f3.chronicle, &f3.backdated)
            .map_err(err)?
            .authorized,
        "S3: backdated assign is authorized",
    )?;
    let secs = t.elapsed().as_secs_f64();
    ensure(secs < 1.0, format!("took {secs:.3} s"))?;
    Ok(format!("S1, S2, S3 exact in {secs:.3} s"))
}

fn enumeration_total(kind: PresetKind) -> usize {
    let full = std::env::var_os("CHRONICAP_FULL_ENUMERATION").is_some_and(|v| v == "1");
    if kind == PresetKind::DenyGrantLater && !full {
        DENY_GRANT_LATER_DEFAULT_TOTAL
    } else {
        ENUMERATION_TOTAL_EVENTS
    }
}

struct Corpus {
    per_preset: Vec<(PresetKind, Campaign, Campaign)>,
    errors: Vec<String>,
}

fn run_corpus() -> Corpus {
    let mut per_preset = Vec::new();
    let mut errors = Vec::new();
    for kind in PresetKind::ALL {
        let small = PolicyPreset::new(kind, vec![entity("A"), entity("B")]).expect("preset");
        let mut enumerated = Campaign::keep_going();
        if let Err(e) = enumerated.enumeration(&small, enumeration_total(kind)) {
            errors.push(format!("{kind} enumeration: {e}"));
        }
        let wide =
            PolicyPreset::new(kind, vec![entity("A"), entity("B"), entity("C")]).expect("preset");
        let template = GenConfig::new(wide, 0).with_byzantine([entity("B")]);
        let mut generated = Campaign::keep_going();
        if let Err((seed, e)) = generated.generated_seeds(&template, 0..GENERATED_SEEDS) {
            errors.push(format!("{kind} seed {seed}: {e}"));
        }
        per_preset.push((kind, enumerated, generated));
    }
    Corpus { per_preset, errors }
}

fn corpus_verdict(c: &Corpus, invariants: &[Invariant]) -> Outcome {
    if !c.errors.is_empty() {
        return Err(c.errors.join("; "));
    }
    let mut parts = Vec::new();
    let mut failures = Vec::new();
    for (kind, en, gen) in &c.per_preset {
        for (what, camp) in [("enumerated", en), ("generated", gen)] {
            for &i in invariants {
                if camp.count(i) > 0 {
                    let first = &camp.first[&i];
                    failures.push(format!(
                        "{kind} {what}: {} {i} violation(s), first at {}: {}",
                        camp.count(i),
                        first.location,
                        first.violation
                    ));
                }
            }
        }
        parts.push(format!(
            "{kind} {} enumerated (≤{} events) + {} generated chronicles",
            en.stats.chronicles,
            enumeration_total(*kind),
            gen.stats.chronicles
        ));
    }
    if failures.is_empty() {
        Ok(format!("0 violations; {}", parts.join("; ")))
    } else {
        Err(failures.join("; "))
    }
}

fn oracle_equivalence(c: &Corpus) -> Outcome {
    let events: u64 = c
        .per_preset
        .iter()
        .map(|(_, e, g)| e.stats.oracle_events + g.stats.oracle_events)
        .sum();
    corpus_verdict(c, &[Invariant::OracleMismatch])
        .map(|s| format!("{events} member verdicts compared; {s}"))
}

fn invariant_campaign(c: &Corpus) -> Outcome {
    let (mut ext, mut probes) = (0, 0);
    for (_, e, g) in &c.per_preset {
        ext += e.stats.extensions + g.stats.extensions;
        probes += e.stats.revocation_probes + g.stats.revocation_probes;
    }
    corpus_verdict(
        c,
        &[
            Invariant::AuthorizationSafety,
            Invariant::QuerySafety,
            Invariant::RevocationSafety,
        ],
    )
    .map(|s| format!("{ext} extensions, {probes} revocation probes; {s}"))
}

fn mutation_self_check(bin: &Path, scratch: &Path) -> Outcome {
    let f = fixtures::s1();
    let alphabet = Alphabet {
        entities: vec![entity("A"), entity("B"), entity("C")],
        kinds: vec![Capability::Assign, Capability::Revoke],
    };
    let probes = alphabet.invocations(&f.chronicle);
    let err = |e: chronicap_core::oracle::CheckError| e.to_string();
    let mut caught = None;
    for (n, v) in probes.iter().enumerate() {
        let correct = check_revocation_safety_with(&f.chronicle, v, RevocationScope::default())
            .map_err(err)?;
        ensure(
            correct.is_none(),
            format!("correct evaluator flagged on probe {v}"),
        )?;
        if caught.is_none() {
            if let Some(w) =
                check_revocation_safety_with(&f.chronicle, v, RevocationScope::PrecursorsOnly)
                    .map_err(err)?
            {
                caught = Some((n + 1, w));
            }
        }
    }
    let (n, w) = caught.ok_or("precursor-only evaluator was never caught")?;
    ensure(
        w.invariant == Invariant::RevocationSafety,
        "wrong invariant",
    )?;
    let path = scratch.join("mutant.witness");
    std::fs::write(&path, encode_witness(&w, None)).map_err(|e| e.to_string())?;
    let decoded = decode_witness(&std::fs::read(&path).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    ensure(
        replay(&decoded).map_err(|e| e.to_string())?.as_ref() == Some(&w),
        "witness does not replay in process",
    )?;
    let status = Command::new(bin)
        .arg("replay")
        .arg(&path)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(
        status.status.code() == Some(1),
        "CLI replay did not reproduce the violation",
    )?;
    Ok(format!(
        "caught at probe {n} of {} on S1; witness replays via CLI",
        probes.len()
    ))
}

fn convergence_matrix() -> Outcome {
    let mut worlds = 0;
    let mut events = 0;
    for kind in PresetKind::ALL {
        for n in 2..=6usize {
            for byz in 0..=2usize.min(n - 1) {
                for drop_rate in [0.0, 0.1, 0.3] {
                    for seed in 0..SIM_SEEDS_PER_CONFIG {
                        // Alternate whether the creator is among the Byzantine.
                        let byzantine = |i: usize| {
                            if seed % 2 == 0 {
                                i >= n - byz
                            } else {
                                i < byz
                            }
                        };
                        let replicas: Vec<(EntityId, bool)> = (0..n)
                            .map(|i| (entity(&format!("R{i}")), byzantine(i)))
                            .collect();
                        let mut cfg = WorldConfig::random(kind, replicas, seed, 40);
                        cfg.drop_rate = drop_rate;
                        cfg.max_delay = seed % 4;
                        let label = format!("{kind} n={n} byz={byz} drop={drop_rate} seed={seed}");
                        let mut w = World::new(cfg).map_err(|e| format!("{label}: {e}"))?;
                        if let Some(v) = w.run_to_convergence() {
                            return Err(format!("{label}: {v}"));
                        }
                        for r in w.honest() {
                            let a = Authorizer::new(r.chronicle())
                                .map_err(|e| format!("{label}: {e}"))?;
                            ensure(
                                (0..a.index().len()).all(|i| a.precursive_verdict(i).authorized),
                                format!("{label}: {} holds an unauthorized event", r.entity()),
                            )?;
                        }
                        events += w.honest().next().map_or(0, |r| r.chronicle().len());
                        worlds += 1;
                    }
                }
            }
        }
    }
    Ok(format!(
        "{worlds} (config, seed) pairs converged; {events} events in final honest chronicles"
    ))
}

fn anomaly() -> Outcome {
    let path = manifest_dir().join("scenarios/s3_backdating_anomaly.txt");
    let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let s = parse_scenario(&text).map_err(|e| e.to_string())?;
    let mut w = World::new(s.config.clone()).map_err(|e| e.to_string())?;
    let mut split_at = None;
    while w.tick() < s.config.max_steps && w.step() {
        if let Some(bd) = w.label("bd") {
            let vs = w.discursive_verdicts(&bd);
            if split_at.is_none() && vs.iter().any(|(_, v)| *v) && vs.iter().any(|(_, v)| !*v) {
                split_at = Some((w.tick(), vs));
            }
        }
    }
    let (tick, vs) = split_at.ok_or("honest replicas never disagreed on the backdated event")?;
    w.quiesce();
    ensure(w.check_convergence().is_none(), "replicas did not converge")?;
    let bd = w.label("bd").ok_or("backdated event was never created")?;
    let after = w.discursive_verdicts(&bd);
    ensure(
        after.len() == w.honest().count() && after.iter().all(|(_, v)| !*v),
        "honest replicas do not all hold the backdated event as unauthorized",
    )?;
    let described: Vec<String> = vs
        .iter()
        .map(|(e, v)| format!("{e}={}", if *v { "authorized" } else { "unauthorized" }))
        .collect();
    let run = run_scenario(&s).map_err(|e| e.to_string())?;
    ensure(run.failures.is_empty(), run.failures.join("; "))?;
    Ok(format!(
        "tick {tick}: {}; after quiesce all unauthorized",
        described.join(", ")
    ))
}

fn lattice_laws() -> Outcome {
    for seed in 0..LATTICE_TRIPLES {
        let [a, b, c] = sample_triple(seed);
        if let Some(law) = join_law_failure(&a, &b, &c) {
            return Err(format!("{law} fails for triple seed {seed}"));
        }
    }
    Ok(format!(
        "{LATTICE_TRIPLES} chronicle triples, serialized forms equal"
    ))
}

fn hash_from_stdout(out: &[u8]) -> Option<String> {
    String::from_utf8_lossy(out)
        .lines()
        .find_map(|l| l.strip_prefix("trace-hash: ").map(str::to_owned))
}

fn determinism(bin: &Path, scratch: &Path) -> Outcome {
    let path = manifest_dir().join("scenarios/byzantine_gossip.txt");
    let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let s = parse_scenario(&text).map_err(|e| e.to_string())?;
    let in_process = |seed: u64| -> Result<String, String> {
        let mut cfg = s.config.clone();
        cfg.seed = seed;
        let mut w = World::new(cfg).map_err(|e| e.to_string())?;
        w.run_to_convergence();
        Ok(w.trace_hash())
    };
    let first = in_process(s.config.seed)?;
    ensure(
        first == in_process(s.config.seed)?,
        "two in-process runs differ",
    )?;
    ensure(
        first != in_process(s.config.seed + 1)?,
        "seed does not affect the trace",
    )?;
    let mut hashes = Vec::new();
    for k in 0..2 {
        let out = Command::new(bin)
            .args(["run", path.to_str().ok_or("path")?, "--out"])
            .arg(scratch.join(format!("det{k}")))
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), "CLI run failed")?;
        hashes.push(hash_from_stdout(&out.stdout).ok_or("no trace hash printed")?);
    }
    ensure(
        hashes.iter().all(|h| *h == first),
        format!("process runs gave {hashes:?}, in-process {first}"),
    )?;
    let fuzz = || {
        Command::new(bin)
            .args([
                "fuzz",
                "--preset",
                "deny-grant-later",
                "--seeds",
                "0..200",
                "--byz",
                "C",
            ])
            .output()
            .map(|o| o.stdout)
            .map_err(|e| e.to_string())
    };
    ensure(fuzz()? == fuzz()?, "fuzz output differs between runs")?;
    Ok(format!(
        "trace hash {}… stable in process and across 2 process runs",
        &first[..16]
    ))
}

fn encoding_stability() -> Outcome {
    let path = manifest_dir().join("../core/tests/golden/fixture_ids.txt");
    let pinned = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let events = all_fixture_events();
    let lines: Vec<&str> = pinned.lines().collect();
    ensure(
        lines.len() == events.len(),
        "golden file has a different event count",
    )?;
    for ((label, e), line) in events.iter().zip(lines) {
        let want = format!(
            "{label} {} {}",
            e.id().to_hex(),
            hex::encode(encode_event(e))
        );
        ensure(
            want == line,
            format!("{label} differs from the golden file"),
        )?;
    }
    Ok(format!("{} fixture ids bit-exact", events.len()))
}

fn main() {
    let bin = PathBuf::from(env!("CARGO_BIN_EXE_chronicap"));
    let scratch = tempfile::tempdir().expect("temporary directory");
    let mut failed = 0;
    let mut report = |n: u32, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let outcome = f();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n} {name}: PASS ({detail}) [{secs:.1} s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n} {name}: FAIL ({detail}) [{secs:.1} s]");
            }
        }
    };
    report(1, "fixture semantics", &mut fixture_semantics);
    let t = Instant::now();
    let corpus = run_corpus();
    println!(
        "shared corpus for criteria 2 and 3 built in {:.1} s",
        t.elapsed().as_secs_f64()
    );
    report(2, "oracle equivalence", &mut || oracle_equivalence(&corpus));
    report(3, "invariant falsification", &mut || {
        invariant_campaign(&corpus)
    });
    report(4, "mutation self-check", &mut || {
        mutation_self_check(&bin, scratch.path())
    });
    report(5, "convergence", &mut convergence_matrix);
    report(6, "non-monotonic anomaly", &mut anomaly);
    report(7, "lattice laws", &mut lattice_laws);
    report(8, "determinism", &mut || determinism(&bin, scratch.path()));
    report(9, "encoding stability", &mut encoding_stability);
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
    println!("all 9 criteria passed");
}
