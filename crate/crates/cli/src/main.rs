use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use mht_core::config::ConfigDocument;
use mht_core::metrics::evaluate;
use mht_core::mwis::{brute_force_mwis, build_conflict_graph, solve_mwis, ConflictGraph};
use mht_core::simulator::{generate, ScenarioSpec};
use mht_core::stream::{check_disjoint, read_events_file, read_jsonl, write_jsonl, ObsEvent, TrackRecord, TruthRecord};
use mht_core::tracker::{TimingStats, Tracker};
use mht_core::{CameraNetworkModel, Error};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "mht", version, about = "Multi-camera multiple hypothesis tracking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic observation stream, its ground truth and a matching config.
    Simulate(SimulateArgs),
    /// Track an observation stream and write the final tracks.
    Track(TrackArgs),
    /// Identity measures of a track file against ground truth.
    Evaluate(EvaluateArgs),
    /// Simulate and track a scenario, reporting per-scan latency.
    Bench(BenchArgs),
    /// Print the hypothesis forest after a given scan.
    DumpForest(DumpForestArgs),
    /// Exhaustive maximum weighted independent set of a graph dump.
    OracleMwis(OracleArgs),
}

#[derive(Args)]
struct Overrides {
    /// Override a configuration key, e.g. `--set n_scan=3` or `--set tracker.w_a=0.9`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Directory receiving events.jsonl, truth.jsonl, config.toml and manifest.json.
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct TrackArgs {
    #[arg(long)]
    events: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Defaults to `<out>.manifest.json`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Scenario seed to record in the manifest.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    tracks: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Tracker settings; the scenario's mode defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct DumpForestArgs {
    #[arg(long)]
    events: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Last scan to process; the whole stream when omitted.
    #[arg(long)]
    scan: Option<i64>,
    /// Write the conflict graph of the current leaves here.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Fail unless the branch-and-bound solver agrees.
    #[arg(long)]
    check: bool,
}

/// Everything needed to rerun a command and compare its outputs.
#[derive(Serialize)]
struct RunManifest {
    command: &'static str,
    version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    spec: Option<ScenarioSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    config: Option<ConfigDocument>,
    inputs: BTreeMap<&'static str, PathBuf>,
    outputs: BTreeMap<&'static str, PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    timing: Option<TimingStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    track_count: Option<usize>,
}

impl RunManifest {
    fn new(command: &'static str) -> Self {
        Self {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed: None,
            spec: None,
            config: None,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            timing: None,
            track_count: None,
        }
    }

    fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}

fn load_spec(path: &Path, overrides: &[String]) -> Result<ScenarioSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let spec =
        ScenarioSpec::parse_with_overrides(&text, overrides).with_context(|| format!("in {}", path.display()))?;
    spec.validate()?;
    Ok(spec)
}

fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<ConfigDocument> {
    match path {
        Some(p) => ConfigDocument::load(p, overrides).with_context(|| format!("in {}", p.display())),
        None => Ok(ConfigDocument::parse_with_overrides("", overrides)?),
    }
}

fn require_network(doc: &ConfigDocument) -> Result<CameraNetworkModel> {
    match &doc.network {
        Some(n) => Ok(n.clone()),
        None => Err(Error::InvalidConfig(vec!["a [network] table is required".into()]).into()),
    }
}

fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_jsonl(BufWriter::new(f), records).with_context(|| format!("writing {}", path.display()))
}

fn read_records<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_jsonl(BufReader::new(f), &path.display().to_string())?)
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let spec = load_spec(&args.spec, &args.overrides.set)?;
    let scenario = generate(&spec)?;
    std::fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    let out = |name: &str| args.out_dir.join(name);
    write_records(&out("events.jsonl"), &scenario.events)?;
    write_records(&out("truth.jsonl"), &scenario.truth.records())?;
    let config = ConfigDocument {
        tracker: spec.tracker_defaults(),
        network: Some(scenario.network),
    };
    std::fs::write(out("config.toml"), config.to_toml())?;

    let mut m = RunManifest::new("simulate");
    m.seed = Some(spec.seed);
    m.spec = Some(spec);
    m.config = Some(config);
    m.inputs.insert("spec", args.spec.clone());
    for (k, name) in [
        ("events", "events.jsonl"),
        ("truth", "truth.jsonl"),
        ("config", "config.toml"),
    ] {
        m.outputs.insert(k, out(name));
    }
    m.write(&out("manifest.json"))?;
    println!("events={}", scenario.events.len());
    println!("observations={}", scenario.truth.observation_count());
    println!("identities={}", scenario.truth.identities.len());
    Ok(())
}

fn run_tracker(
    doc: &ConfigDocument,
    net: CameraNetworkModel,
    events: &[ObsEvent],
) -> Result<(Vec<TrackRecord>, TimingStats)> {
    doc.validate(&net)?;
    let mut t = Tracker::new(doc.tracker.clone(), net)?;
    t.run(events)?;
    let tracks = t.final_tracks()?;
    Ok((tracks, TimingStats::from_timings(t.timings())))
}

fn track(args: TrackArgs) -> Result<()> {
    let doc = load_config(args.config.as_deref(), &args.overrides.set)?;
    let net = require_network(&doc)?;
    let events = read_events_file(&args.events)?;
    let (tracks, timing) = run_tracker(&doc, net, &events)?;
    check_disjoint(&tracks)?;
    write_records(&args.out, &tracks)?;

    let manifest_path = args.manifest.clone().unwrap_or_else(|| {
        let mut s = args.out.clone().into_os_string();
        s.push(".manifest.json");
        s.into()
    });
    let mut m = RunManifest::new("track");
    m.seed = args.seed;
    m.config = Some(doc);
    m.inputs.insert("events", args.events.clone());
    if let Some(c) = &args.config {
        m.inputs.insert("config", c.clone());
    }
    m.outputs.insert("tracks", args.out.clone());
    m.track_count = Some(tracks.len());
    m.timing = Some(timing);
    m.write(&manifest_path)?;
    println!("tracks={}", tracks.len());
    Ok(())
}

fn evaluate_cmd(args: EvaluateArgs) -> Result<()> {
    let tracks: Vec<TrackRecord> = read_records(&args.tracks)?;
    let truth: Vec<TruthRecord> = read_records(&args.truth)?;
    let report = evaluate(&tracks, &truth)?;
    print!("{}", report.to_key_values());
    if let Some(p) = &args.json {
        std::fs::write(p, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    Ok(())
}

#[derive(Serialize)]
struct BenchReport {
    seed: u64,
    n_targets: usize,
    observations: usize,
    scans: usize,
    mean_scan_ms: f64,
    max_scan_ms: f64,
    peak_leaves: usize,
    total_seconds: f64,
    tracks: usize,
    real_time: bool,
}

fn bench(args: BenchArgs) -> Result<()> {
    let spec = load_spec(&args.spec, &[])?;
    let scenario = generate(&spec)?;
    let mut doc = match &args.config {
        Some(_) => load_config(args.config.as_deref(), &args.overrides.set)?,
        None => {
            let base = ConfigDocument {
                tracker: spec.tracker_defaults(),
                network: None,
            };
            ConfigDocument::parse_with_overrides(&base.to_toml(), &args.overrides.set)?
        }
    };
    doc.network = Some(scenario.network.clone());
    let started = Instant::now();
    let (tracks, timing) = run_tracker(&doc, scenario.network, &scenario.events)?;
    let report = BenchReport {
        seed: spec.seed,
        n_targets: spec.n_targets,
        observations: scenario.truth.observation_count(),
        scans: timing.scans,
        mean_scan_ms: timing.mean_seconds * 1e3,
        max_scan_ms: timing.max_seconds * 1e3,
        peak_leaves: timing.peak_leaves,
        total_seconds: started.elapsed().as_secs_f64(),
        tracks: tracks.len(),
        real_time: timing.mean_seconds < doc.tracker.scan_seconds,
    };
    let value = serde_json::to_value(&report)?;
    for (k, v) in value.as_object().into_iter().flatten() {
        println!("{k}={v}");
    }
    if let Some(p) = &args.json {
        std::fs::write(p, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    Ok(())
}

fn dump_forest(args: DumpForestArgs) -> Result<()> {
    let doc = load_config(args.config.as_deref(), &args.overrides.set)?;
    let net = require_network(&doc)?;
    doc.validate(&net)?;
    let events = read_events_file(&args.events)?;
    let mut t = Tracker::new(doc.tracker.clone(), net)?.with_invariant_checks(true);
    t.run_until(&events, args.scan.unwrap_or(i64::MAX))?;
    let Some(forest) = t.forest() else {
        println!("empty");
        return Ok(());
    };
    print!("{}", forest.dump());
    if let Some(p) = &args.graph {
        let g = build_conflict_graph(forest, doc.tracker.execution);
        std::fs::write(p, g.to_edge_list()).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn oracle_mwis(args: OracleArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.graph).with_context(|| format!("reading {}", args.graph.display()))?;
    let g = ConflictGraph::from_edge_list(&text)?;
    let exact = brute_force_mwis(&g)?;
    let ids: Vec<String> = exact.selected.iter().map(|v| g.vertices[*v].id.to_string()).collect();
    println!("weight={:.9}", exact.weight);
    println!("selected={}", ids.join(","));
    if args.check {
        let fast = solve_mwis(&g);
        if fast.selected != exact.selected || (fast.weight - exact.weight).abs() > 1e-9 {
            return Err(Error::Consistency(format!(
                "solver chose {:?} ({}) but the exhaustive optimum is {:?} ({})",
                fast.selected, fast.weight, exact.selected, exact.weight
            ))
            .into());
        }
        println!("check=ok");
    }
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(inner) if inner.is_internal() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Track(a) => track(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Bench(a) => bench(a),
        Command::DumpForest(a) => dump_forest(a),
        Command::OracleMwis(a) => oracle_mwis(a),
    };
    match result {
        Ok(()) => {
            let _ = std::io::stdout().flush();
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
