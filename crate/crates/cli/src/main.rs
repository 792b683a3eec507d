use std::ops::Range;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use chronicap_core::codec::{decode_chronicle, encode_chronicle, to_dot, to_json};
use chronicap_core::oracle::campaign::{Campaign, CampaignError};
use chronicap_core::oracle::generate::MAX_GENERATED_EVENTS;
use chronicap_core::oracle::witness::{decode_witness, encode_witness, replay};
use chronicap_core::oracle::{GenConfig, Violation};
use chronicap_core::sim::scenario::{parse_scenario, run_scenario};
use chronicap_core::{Authorizer, EntityId, GroupChronicle, PolicyPreset, PresetKind};

const OK: u8 = 0;
const VIOLATION: u8 = 1;
const USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "chronicap",
    version,
    about = "Group chronicle scenarios, fuzz campaigns, checks and exports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file, quiesce, and check convergence and invariants.
    Run {
        scenario: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        drop_rate: Option<f64>,
        #[arg(long)]
        max_delay: Option<u64>,
        /// Directory for the trace log, final honest chronicles and any
        /// witness.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Check generated chronicles for a range of seeds.
    Fuzz {
        #[arg(long, default_value = "allow-revoke-later")]
        preset: PresetKind,
        /// Half-open seed range, e.g. 0..10000.
        #[arg(long, value_parser = parse_seeds, default_value = "0..100")]
        seeds: Range<u64>,
        /// Events added after setup, at most 16.
        #[arg(long, default_value_t = MAX_GENERATED_EVENTS)]
        max_events: usize,
        /// Participants, creator first.
        #[arg(long, value_delimiter = ',', default_value = "A,B,C")]
        entities: Vec<EntityId>,
        /// Byzantine participants.
        #[arg(long, value_delimiter = ',')]
        byz: Vec<EntityId>,
        /// Directory for any witness.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Verify a chronicle file and print caps, values and verdicts.
    Check { chronicle: PathBuf },
    /// Print a chronicle file as Graphviz or JSON.
    Export {
        chronicle: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Dot)]
        format: Format,
    },
    /// Re-run the checker named by a witness file.
    Replay { witness: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Dot,
    Json,
}

fn parse_seeds(s: &str) -> Result<Range<u64>, String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected A..B, got {s:?}"))?;
    let a: u64 = a.parse().map_err(|_| format!("bad range start {a:?}"))?;
    let b: u64 = b.parse().map_err(|_| format!("bad range end {b:?}"))?;
    if a > b {
        return Err(format!("range {s:?} starts after it ends"));
    }
    Ok(a..b)
}

struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: USAGE,
        message: message.into(),
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            seed,
            drop_rate,
            max_delay,
            out,
        } => cmd_run(&scenario, seed, drop_rate, max_delay, &out),
        Command::Fuzz {
            preset,
            seeds,
            max_events,
            entities,
            byz,
            out,
        } => cmd_fuzz(preset, seeds, max_events, entities, byz, &out),
        Command::Check { chronicle } => cmd_check(&chronicle),
        Command::Export { chronicle, format } => cmd_export(&chronicle, format),
        Command::Replay { witness } => cmd_replay(&witness),
    };
    ExitCode::from(match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    })
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_chronicle(path: &Path) -> Result<GroupChronicle, Failure> {
    decode_chronicle(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn report_violation(v: &Violation, witness: &Path, repro: &str) -> Outcome {
    write(witness, &encode_witness(v, Some(repro)))?;
    println!("violation: {v}");
    println!("witness: {}", witness.display());
    println!("repro: {repro}");
    Ok(VIOLATION)
}

fn cmd_run(
    path: &Path,
    seed: Option<u64>,
    drop_rate: Option<f64>,
    max_delay: Option<u64>,
    out: &Path,
) -> Outcome {
    let text = String::from_utf8(read(path)?)
        .map_err(|_| usage(format!("{}: not UTF-8", path.display())))?;
    let mut s = parse_scenario(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if let Some(seed) = seed {
        s.config.seed = seed;
    }
    if let Some(d) = drop_rate {
        if !(0.0..=1.0).contains(&d) {
            return Err(usage("--drop-rate must be within [0, 1]"));
        }
        s.config.drop_rate = d;
    }
    if let Some(d) = max_delay {
        s.config.max_delay = d;
    }
    let run = run_scenario(&s).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let w = &run.world;
    let stem = path
        .file_stem()
        .map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned());
    let mut trace = w.trace().join("\n");
    trace.push_str(&format!("\nhash {}\n", w.trace_hash()));
    let trace_path = out.join(format!("{stem}.trace"));
    write(&trace_path, trace.as_bytes())?;

    println!("scenario: {}", path.display());
    println!("seed: {}", s.config.seed);
    println!("ticks: {}", w.tick());
    println!("trace: {}", trace_path.display());
    println!("trace-hash: {}", w.trace_hash());
    let names = |ids: Vec<chronicap_core::EventId>| -> String {
        let mut out: Vec<String> = ids
            .iter()
            .map(|id| {
                w.labels()
                    .iter()
                    .find(|(_, v)| *v == id)
                    .map_or_else(|| id.short(), |(k, _)| k.clone())
            })
            .collect();
        out.sort();
        format!("{{{}}}", out.join(", "))
    };
    for r in w.honest() {
        let file = out.join(format!("{stem}.{}.chronicle", r.entity()));
        write(&file, &encode_chronicle(r.chronicle()))?;
        let (caps, values) = match Authorizer::new(r.chronicle()) {
            Ok(a) => (
                names(a.caps().iter().map(|e| e.id()).collect()),
                names(a.values().iter().map(|e| e.id()).collect()),
            ),
            Err(e) => (format!("<{e}>"), format!("<{e}>")),
        };
        println!(
            "replica {}: {} events, caps {caps}, values {values}",
            r.entity(),
            r.chronicle().len()
        );
    }

    let mut repro = format!(
        "chronicap run {} --seed {} --drop-rate {} --max-delay {}",
        path.display(),
        s.config.seed,
        s.config.drop_rate,
        s.config.max_delay
    );
    if out != Path::new(".") {
        repro.push_str(&format!(" --out {}", out.display()));
    }
    let witness = out.join(format!("{stem}.witness"));
    if let Some(v) = &run.convergence {
        return report_violation(v, &witness, &repro);
    }
    let mut campaign = Campaign::new();
    let mut checked: Vec<&GroupChronicle> = Vec::new();
    for r in w.honest() {
        if checked.contains(&r.chronicle()) {
            continue;
        }
        checked.push(r.chronicle());
        match campaign.check_whole_chronicle(r.chronicle()) {
            Ok(()) => {}
            Err(CampaignError::Violation(v)) => return report_violation(&v, &witness, &repro),
            Err(CampaignError::Check(e)) => {
                println!(
                    "violation: replica {} chronicle fails a precondition: {e}",
                    r.entity()
                );
                println!("repro: {repro}");
                return Ok(VIOLATION);
            }
        }
    }
    println!(
        "checked: {} extensions, {} revocation probes",
        campaign.stats.extensions, campaign.stats.revocation_probes
    );
    if !run.failures.is_empty() {
        for f in &run.failures {
            println!("expectation failed: {f}");
        }
        println!("repro: {repro}");
        return Ok(VIOLATION);
    }
    println!("ok");
    Ok(OK)
}

fn cmd_fuzz(
    kind: PresetKind,
    seeds: Range<u64>,
    max_events: usize,
    entities: Vec<EntityId>,
    byz: Vec<EntityId>,
    out: &Path,
) -> Outcome {
    let preset = PolicyPreset::new(kind, entities.clone()).map_err(usage)?;
    let mut template = GenConfig::new(preset, 0).with_byzantine(byz.clone());
    template.max_events = max_events;
    template.validate().map_err(usage)?;
    let join = |es: &[EntityId]| {
        es.iter()
            .map(EntityId::as_str)
            .collect::<Vec<_>>()
            .join(",")
    };
    let mut campaign = Campaign::new();
    let mut cases = 0u64;
    for seed in seeds.clone() {
        let cfg = GenConfig {
            seed,
            ..template.clone()
        };
        match campaign.generated_case(&cfg) {
            Ok(()) => cases += 1,
            Err(e) => {
                let mut repro = format!(
                    "chronicap fuzz --preset {kind} --seeds {seed}..{} --max-events {max_events} --entities {}",
                    seed + 1,
                    join(&entities)
                );
                if !byz.is_empty() {
                    repro.push_str(&format!(" --byz {}", join(&byz)));
                }
                if out != Path::new(".") {
                    repro.push_str(&format!(" --out {}", out.display()));
                }
                println!("seed {seed}: failed");
                return match e {
                    CampaignError::Violation(v) => {
                        let path = out.join(format!("witness-{kind}-{seed}.txt"));
                        report_violation(&v, &path, &repro)
                    }
                    CampaignError::Check(e) => {
                        println!("violation: checker precondition failed: {e}");
                        println!("repro: {repro}");
                        Ok(VIOLATION)
                    }
                };
            }
        }
    }
    println!(
        "fuzz {kind} seeds {}..{}: {cases} cases, {} extensions, {} oracle events, {} revocation probes, 0 violations",
        seeds.start,
        seeds.end,
        campaign.stats.extensions,
        campaign.stats.oracle_events,
        campaign.stats.revocation_probes
    );
    Ok(OK)
}

fn cmd_check(path: &Path) -> Outcome {
    let g = load_chronicle(path)?;
    let auth = match Authorizer::new(&g) {
        Ok(a) => a,
        Err(e) => {
            println!("invalid: {e} ({} events)", g.len());
            return Ok(VIOLATION);
        }
    };
    println!("valid: {} events", g.len());
    let line = |e: &chronicap_core::Event| format!("{} {}", e.id().to_hex(), e.voc());
    let mut caps = auth.caps();
    caps.sort_by_key(|e| e.id());
    println!("caps: {}", caps.len());
    for e in &caps {
        println!("  {}", line(e));
    }
    let mut values = auth.values();
    values.sort_by_key(|e| e.id());
    println!("values: {}", values.len());
    for e in &values {
        println!("  {}", line(e));
    }
    println!("verdicts:");
    for (e, v) in auth.all_verdicts() {
        println!("  {} {v}", line(&e));
    }
    Ok(OK)
}

fn cmd_export(path: &Path, format: Format) -> Outcome {
    let g = load_chronicle(path)?;
    match format {
        Format::Dot => print!("{}", to_dot(&g)),
        Format::Json => println!("{}", to_json(&g)),
    }
    Ok(OK)
}

fn cmd_replay(path: &Path) -> Outcome {
    let w = decode_witness(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    println!("recorded: {}", w.violation);
    if let Some(r) = &w.repro {
        println!("repro: {r}");
    }
    match replay(&w).map_err(|e| usage(format!("{}: {e}", path.display())))? {
        Some(v) => {
            println!("reproduced: {v}");
            Ok(VIOLATION)
        }
        None => {
            println!("not reproduced");
            Ok(OK)
        }
    }
}
