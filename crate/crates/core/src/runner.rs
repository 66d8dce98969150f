//! End-to-end run orchestration: dataset in, artifact directory out.
//!
//! One top-level seed drives everything. Sub-seeds for the arrival order,
//! the deletion sampler, and the tie-breaking rng are derived with splitmix64
//! over (seed, stream index) so changing one consumer cannot shift another.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::engine::{self, Assigner, Engine, EngineConfig, GateDirection, NullObserver, RunOutput};
use crate::graph::{
    parse_edge_list, parse_manifest, validate_against_manifest, Dataset, EdgeListFormat,
    GraphEvent,
};
use crate::metrics;
use crate::net::{self, WorkerReport};
use crate::state::{CapacityConfig, PartitionId, PartitionStats};
use crate::stream::{build_schedule, ScenarioConfig, Schedule};
use crate::{Error, Result};

/// Deterministic 64-bit mix (splitmix64 finalizer).
pub fn derive_seed(root: u64, stream: u64) -> u64 {
    let mut z = root
        .wrapping_add(stream.wrapping_mul(0x9e3779b97f4a7c15))
        .wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

const SEED_ORDER: u64 = 1;
const SEED_DELETE: u64 = 2;
const SEED_ASSIGN: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Streaming,
    Hash,
    Ldg,
}

impl Algo {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algo::Streaming => "sdp",
            Algo::Hash => "hash",
            Algo::Ldg => "ldg",
        }
    }
}

impl std::str::FromStr for Algo {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "sdp" => Ok(Algo::Streaming),
            "hash" => Ok(Algo::Hash),
            "ldg" => Ok(Algo::Ldg),
            other => Err(format!("unknown algo {other:?} (expected sdp|hash|ldg)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    InProcess,
    /// Placements mirrored to local socket workers; `workers` is the
    /// starting worker count.
    Distributed { workers: usize },
}

impl std::str::FromStr for RunMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "inproc" => Ok(RunMode::InProcess),
            "distributed" => Ok(RunMode::Distributed { workers: 1 }),
            other => Err(format!("unknown mode {other:?} (expected inproc|distributed)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSpec {
    pub dataset: PathBuf,
    pub format: EdgeListFormat,
    pub manifest: Option<PathBuf>,
    pub algo: Algo,
    pub scenario: ScenarioConfig,
    /// Edge capacity per partition; `None` derives from the dataset (see
    /// [`default_maxcap`]).
    pub maxcap: Option<u64>,
    pub tolerance: f64,
    pub dest_param: f64,
    pub seed: u64,
    pub gate_direction: GateDirection,
    pub balancing: bool,
    pub audit: bool,
    pub mode: RunMode,
    /// Baseline partition count. `None` reuses the final k of a silent
    /// streaming run over the same schedule.
    pub fixed_k: Option<usize>,
}

impl RunSpec {
    pub fn new(dataset: impl Into<PathBuf>, format: EdgeListFormat) -> RunSpec {
        RunSpec {
            dataset: dataset.into(),
            format,
            manifest: None,
            algo: Algo::Streaming,
            scenario: ScenarioConfig::default(),
            maxcap: None,
            tolerance: 20.0,
            dest_param: 5.0,
            seed: 0,
            gate_direction: GateDirection::Prose,
            balancing: true,
            audit: false,
            mode: RunMode::InProcess,
            fixed_k: None,
        }
    }
}

/// Capacity sized for the full dataset to land on about four partitions
/// with 20% headroom.
pub fn default_maxcap(edge_count: usize) -> u64 {
    ((edge_count as f64 * 1.2 / 4.0).ceil() as u64).max(1)
}

/// Vertex quota for the greedy baseline: |V|/k with 10% slack.
pub fn ldg_vertex_capacity(vertex_count: usize, k: usize) -> u64 {
    ((vertex_count as f64 * 1.1 / k as f64).ceil() as u64).max(1)
}

#[derive(Debug)]
pub struct RunArtifacts {
    pub out: RunOutput,
    pub final_k: usize,
    pub stats: BTreeMap<PartitionId, PartitionStats>,
    pub placements: Vec<(u64, u32)>,
    pub edges_seen: u64,
    pub warn_count: u64,
    /// Shard reports from the socket workers (distributed mode only).
    pub worker_reports: Vec<WorkerReport>,
}

pub fn load_dataset(spec: &RunSpec) -> Result<Dataset> {
    let d = parse_edge_list(&spec.dataset, spec.format)?;
    if let Some(mpath) = &spec.manifest {
        let m = parse_manifest(mpath)?;
        validate_against_manifest(&d, &m)?;
    }
    Ok(d)
}

fn scenario_with_seeds(spec: &RunSpec) -> ScenarioConfig {
    ScenarioConfig {
        order_seed: derive_seed(spec.seed, SEED_ORDER),
        delete_seed: derive_seed(spec.seed, SEED_DELETE),
        ..spec.scenario
    }
}

pub fn build_run_schedule(spec: &RunSpec, d: &Dataset) -> Result<Schedule> {
    build_schedule(d, &scenario_with_seeds(spec))
}

fn engine_config(spec: &RunSpec, d: &Dataset) -> Result<EngineConfig> {
    let maxcap = spec.maxcap.unwrap_or_else(|| default_maxcap(d.edge_count()));
    let cap = CapacityConfig::new(maxcap, spec.tolerance, spec.dest_param)?;
    let mut cfg = EngineConfig::new(crate::scale::ScalingConfig::from_capacity(&cap)?);
    cfg.gate_direction = spec.gate_direction;
    cfg.balancing = spec.balancing;
    cfg.audit = spec.audit;
    cfg.rng_seed = derive_seed(spec.seed, SEED_ASSIGN);
    Ok(cfg)
}

fn collect(engine: &Engine, out: RunOutput, reports: Vec<WorkerReport>) -> RunArtifacts {
    let s = engine.summary();
    let mut placements: Vec<(u64, u32)> = s
        .placements()
        .map(|(v, p)| (v.0, p.0))
        .collect();
    placements.sort_unstable();
    RunArtifacts {
        final_k: s.partition_count(),
        stats: s.stats(),
        placements,
        edges_seen: engine.edges_seen(),
        warn_count: engine.warn_count(),
        worker_reports: reports,
        out,
    }
}

/// Runs an already-built event stream under `spec`'s engine settings.
pub fn execute_events(
    spec: &RunSpec,
    d: &Dataset,
    events: &[GraphEvent],
    interval_marks: &[u64],
) -> Result<RunArtifacts> {
    let base = engine_config(spec, d)?;
    match spec.algo {
        Algo::Streaming => match spec.mode {
            RunMode::InProcess => {
                let (engine, out) =
                    engine::run_stream(events, base, interval_marks, &mut NullObserver)?;
                Ok(collect(&engine, out, Vec::new()))
            }
            RunMode::Distributed { workers } => {
                let (engine, out, reports) =
                    net::run_distributed(events, base, interval_marks, workers)?;
                verify_shards(&engine, &reports)?;
                Ok(collect(&engine, out, reports))
            }
        },
        Algo::Hash | Algo::Ldg => {
            if matches!(spec.mode, RunMode::Distributed { .. }) {
                return Err(Error::Config("baselines run in-process only".into()));
            }
            let k = match spec.fixed_k {
                Some(k) if k >= 1 => k,
                Some(_) => return Err(Error::Config("fixed_k must be >= 1".into())),
                // Same k as the streaming run would end at, so comparisons
                // are like for like.
                None => {
                    let (engine, _) =
                        engine::run_stream(events, base, &[], &mut NullObserver)?;
                    engine.summary().partition_count()
                }
            };
            let mut cfg = base;
            cfg.elastic = false;
            cfg.assigner = match spec.algo {
                Algo::Hash => Assigner::Hash,
                _ => Assigner::Ldg {
                    vertex_capacity: ldg_vertex_capacity(d.vertex_count(), k),
                },
            };
            let mut engine = Engine::with_fixed_partitions(cfg, k);
            let out = engine::run_into(&mut engine, events, interval_marks, &mut NullObserver)?;
            Ok(collect(&engine, out, Vec::new()))
        }
    }
}

/// The union of worker shards must equal the engine's placement map exactly.
fn verify_shards(engine: &Engine, reports: &[WorkerReport]) -> Result<()> {
    let mut from_workers: BTreeMap<u64, u32> = BTreeMap::new();
    for r in reports {
        for &v in r.shard.keys() {
            if from_workers.insert(v.0, r.partition.0).is_some() {
                return Err(Error::Transport(format!(
                    "vertex {v} present in more than one worker shard"
                )));
            }
        }
    }
    let from_engine: BTreeMap<u64, u32> = engine
        .summary()
        .placements()
        .map(|(v, p)| (v.0, p.0))
        .collect();
    if from_workers != from_engine {
        return Err(Error::Transport(format!(
            "shard union ({} vertices) disagrees with coordinator placements ({} vertices)",
            from_workers.len(),
            from_engine.len()
        )));
    }
    Ok(())
}

/// Full pipeline: parse, schedule, run.
pub fn execute(spec: &RunSpec) -> Result<RunArtifacts> {
    let d = load_dataset(spec)?;
    let schedule = build_run_schedule(spec, &d)?;
    execute_events(spec, &d, &schedule.events, &schedule.interval_marks)
}

fn spec_echo(spec: &RunSpec, d: &Dataset) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "dataset = {}", spec.dataset.display());
    let _ = writeln!(s, "name = {}", d.name);
    let _ = writeln!(s, "vertices = {}", d.vertex_count());
    let _ = writeln!(s, "edges = {}", d.edge_count());
    let _ = writeln!(s, "algo = {}", spec.algo.as_str());
    let _ = writeln!(s, "intervals = {}", spec.scenario.intervals);
    let _ = writeln!(s, "add_percent = {}", spec.scenario.add_percent);
    let _ = writeln!(s, "delete_percent = {}", spec.scenario.delete_vertex_percent);
    let _ = writeln!(
        s,
        "maxcap = {}",
        spec.maxcap.unwrap_or_else(|| default_maxcap(d.edge_count()))
    );
    let _ = writeln!(s, "tolerance = {}", spec.tolerance);
    let _ = writeln!(s, "dest_param = {}", spec.dest_param);
    let _ = writeln!(s, "seed = {}", spec.seed);
    let _ = writeln!(
        s,
        "gate_direction = {}",
        match spec.gate_direction {
            GateDirection::Prose => "prose",
            GateDirection::Listing => "listing",
        }
    );
    let _ = writeln!(s, "balancing = {}", spec.balancing);
    let _ = writeln!(
        s,
        "mode = {}",
        match spec.mode {
            RunMode::InProcess => "inproc".to_string(),
            RunMode::Distributed { workers } => format!("distributed:{workers}"),
        }
    );
    s
}

/// Runs `spec` and writes `run.txt`, `metrics.csv`, `scaling.csv`,
/// `placements.txt`, and (with audit on) `audit.csv` into `out_dir`.
pub fn run_to_dir(spec: &RunSpec, out_dir: &Path) -> Result<RunArtifacts> {
    let d = load_dataset(spec)?;
    let schedule = build_run_schedule(spec, &d)?;
    let art = execute_events(spec, &d, &schedule.events, &schedule.interval_marks)?;
    fs::create_dir_all(out_dir)?;

    let mut info = spec_echo(spec, &d);
    let _ = writeln!(info, "events = {}", schedule.events.len());
    let _ = writeln!(info, "final_partitions = {}", art.final_k);
    let _ = writeln!(info, "warnings = {}", art.warn_count);
    if !art.worker_reports.is_empty() {
        let _ = writeln!(info, "workers_reported = {}", art.worker_reports.len());
    }
    fs::write(out_dir.join("run.txt"), info)?;

    let f = fs::File::create(out_dir.join("metrics.csv"))?;
    metrics::write_csv(&art.out.series, f)?;

    let mut scaling = String::from("seq,action,partition,k_after,total_edges\n");
    for ev in &art.out.scaling_log {
        let _ = writeln!(
            scaling,
            "{},{},{},{},{}",
            ev.seq,
            match ev.action {
                engine::ScalingAction::Add => "add",
                engine::ScalingAction::Retire => "retire",
            },
            ev.partition.0,
            ev.k_after,
            ev.total_edges
        );
    }
    fs::write(out_dir.join("scaling.csv"), scaling)?;

    let mut placements = String::new();
    for (v, p) in &art.placements {
        let _ = writeln!(placements, "{v},{p}");
    }
    fs::write(out_dir.join("placements.txt"), placements)?;

    if spec.audit {
        let mut audit = String::from("seq,vertex,partition,reason,connectivity,avg_d,th\n");
        for row in &art.out.audit_log {
            let _ = writeln!(
                audit,
                "{},{},{},{},{},{:.9},{:.9}",
                row.seq,
                row.vertex.0,
                row.decision.partition.0,
                row.decision.reason.as_str(),
                row.decision.connectivity,
                row.avg_d,
                row.th
            );
        }
        fs::write(out_dir.join("audit.csv"), audit)?;
    }
    Ok(art)
}

/// One row of the side-by-side comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub algo: Algo,
    pub final_k: usize,
    pub edge_cut_ratio: f64,
    pub load_imbalance: f64,
}

/// Runs all three strategies over the identical schedule. The baselines run
/// at the streaming run's final k.
pub fn compare(spec: &RunSpec, out_dir: &Path) -> Result<Vec<ComparisonRow>> {
    let d = load_dataset(spec)?;
    let schedule = build_run_schedule(spec, &d)?;
    fs::create_dir_all(out_dir)?;
    let mut rows = Vec::new();
    let mut k_from_streaming = None;
    let mut merged = format!("algo,{}\n", metrics::CSV_HEADER);
    for algo in [Algo::Streaming, Algo::Hash, Algo::Ldg] {
        let mut s = spec.clone();
        s.algo = algo;
        s.mode = RunMode::InProcess;
        if algo != Algo::Streaming {
            s.fixed_k = s.fixed_k.or(k_from_streaming);
        }
        let art = execute_events(&s, &d, &schedule.events, &schedule.interval_marks)?;
        if algo == Algo::Streaming {
            k_from_streaming = Some(art.final_k);
        }
        let mut buf = Vec::new();
        metrics::write_csv(&art.out.series, &mut buf)?;
        let csv = String::from_utf8(buf).expect("csv is utf-8");
        for line in csv.lines().skip(1) {
            let _ = writeln!(merged, "{},{line}", algo.as_str());
        }
        fs::write(out_dir.join(format!("metrics-{}.csv", algo.as_str())), &csv)?;
        let last = art.out.series.last();
        rows.push(ComparisonRow {
            algo,
            final_k: art.final_k,
            edge_cut_ratio: last.map_or(0.0, |r| r.edge_cut_ratio),
            load_imbalance: last.map_or(0.0, |r| r.load_imbalance),
        });
    }
    let mut summary = String::from("algo,final_k,edge_cut_ratio,load_imbalance\n");
    for r in &rows {
        let _ = writeln!(
            summary,
            "{},{},{:.9},{:.9}",
            r.algo.as_str(),
            r.final_k,
            r.edge_cut_ratio,
            r.load_imbalance
        );
    }
    fs::write(out_dir.join("summary.csv"), summary)?;
    fs::write(out_dir.join("merged.csv"), merged)?;
    Ok(rows)
}

/// Replays a recorded trace (JSON lines) under `spec`'s engine settings.
/// `interval_every` > 0 inserts a metrics mark every that many events.
pub fn replay_trace(spec: &RunSpec, trace: &Path, interval_every: u64) -> Result<RunArtifacts> {
    // Trace replays have no dataset file; capacity defaults need a stand-in
    // edge count, so require an explicit maxcap up front.
    let maxcap = spec
        .maxcap
        .ok_or_else(|| Error::Config("replay requires an explicit maxcap".into()))?;
    let events = crate::stream::import_trace(trace)?;
    let marks: Vec<u64> = match (events.len() as u64).checked_div(interval_every) {
        None | Some(0) => Vec::new(),
        Some(n) => (1..=n).map(|i| i * interval_every).collect(),
    };
    let d = Dataset::from_edges("trace", &[]);
    let mut s = spec.clone();
    s.maxcap = Some(maxcap);
    execute_events(&s, &d, &events, &marks)
}

fn parse_metrics_csv(path: &Path) -> Result<Vec<(usize, f64, f64)>> {
    let body = fs::read_to_string(path)?;
    let err = |line: usize, msg: String| Error::Parse {
        path: path.display().to_string(),
        line,
        msg,
    };
    let mut rows = Vec::new();
    for (i, line) in body.lines().enumerate() {
        if i == 0 {
            if line != metrics::CSV_HEADER {
                return Err(err(1, "unexpected metrics header".into()));
            }
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 8 {
            return Err(err(i + 1, format!("expected 8 columns, got {}", cols.len())));
        }
        let interval = cols[1]
            .parse()
            .map_err(|e| err(i + 1, format!("bad interval: {e}")))?;
        let ratio = cols[2]
            .parse()
            .map_err(|e| err(i + 1, format!("bad edge_cut_ratio: {e}")))?;
        let dev = cols[3]
            .parse()
            .map_err(|e| err(i + 1, format!("bad load_imbalance: {e}")))?;
        rows.push((interval, ratio, dev));
    }
    Ok(rows)
}

/// Reads every `metrics*.csv` in `dir` and renders a per-interval table of
/// edge-cut and imbalance, with deltas against the first algorithm.
pub fn report_dir(dir: &Path) -> Result<String> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(".csv") && n.starts_with("metrics"))
        })
        .collect();
    files.sort();
    // The streaming run is the comparison baseline when present.
    if let Some(i) = files
        .iter()
        .position(|p| p.file_name().is_some_and(|n| n == "metrics-sdp.csv"))
    {
        files.swap(0, i);
    }
    if files.is_empty() {
        return Err(Error::Config(format!(
            "no metrics CSV files in {}",
            dir.display()
        )));
    }
    let mut series = Vec::new();
    for f in &files {
        let label = f
            .file_stem()
            .unwrap()
            .to_string_lossy()
            .trim_start_matches("metrics-")
            .trim_start_matches("metrics")
            .to_string();
        let label = if label.is_empty() { "run".to_string() } else { label };
        series.push((label, parse_metrics_csv(f)?));
    }
    let mut out = String::new();
    let base_label = series[0].0.clone();
    let _ = writeln!(
        out,
        "{:<10} {:>9} {:>12} {:>14} {:>12} {:>14}",
        "algo", "interval", "edge_cut", "d(edge_cut)", "imbalance", "d(imbalance)"
    );
    for (label, rows) in &series {
        for (idx, &(interval, ratio, dev)) in rows.iter().enumerate() {
            let base = series[0].1.get(idx);
            let (d_ratio, d_dev) = match base {
                Some(&(_, br, bd)) if label != &base_label => (ratio - br, dev - bd),
                _ => (0.0, 0.0),
            };
            let _ = writeln!(
                out,
                "{:<10} {:>9} {:>12.6} {:>+14.6} {:>12.3} {:>+14.3}",
                label, interval, ratio, d_ratio, dev, d_dev
            );
        }
    }
    Ok(out)
}
