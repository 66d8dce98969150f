use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sdp_core::engine::GateDirection;
use sdp_core::graph::EdgeListFormat;
use sdp_core::runner::{self, Algo, RunMode, RunSpec};
use sdp_core::stream::ScenarioConfig;
use sdp_core::Error;

#[derive(Parser)]
#[command(name = "sdp", about = "Streaming dynamic graph partitioner", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment end to end, writing artifacts to --out.
    Run(RunArgs),
    /// Run every algorithm on the identical stream and merge the metrics.
    Compare(RunArgs),
    /// Replay a recorded trace (JSON lines) through the engine.
    Replay(ReplayArgs),
    /// Summarize metrics CSVs from a previous run or comparison.
    Report {
        /// Directory holding metrics*.csv files.
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// Placement strategy.
    #[arg(long, default_value = "sdp", value_parser = parse_algo)]
    algo: Algo,
    /// Per-partition edge capacity; defaults to a value sized for about
    /// four partitions over the full dataset.
    #[arg(long)]
    maxcap: Option<u64>,
    /// Scale-in low-load percentage of maxcap.
    #[arg(long, default_value_t = 20.0)]
    tolerance: f64,
    /// Scale-in destination headroom percentage of maxcap.
    #[arg(long, default_value_t = 5.0)]
    dest_param: f64,
    /// Top-level seed; order, deletions, and tie-breaking all derive from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Balancing gate route.
    #[arg(long, default_value = "prose", value_parser = parse_gate)]
    gate_direction: GateDirection,
    /// Record one audit row per placement decision.
    #[arg(long, default_value_t = false)]
    audit: bool,
    /// Execution mode.
    #[arg(long, default_value = "inproc", value_parser = parse_mode)]
    mode: RunMode,
    /// Starting worker count in distributed mode.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Edge list file.
    #[arg(long)]
    dataset: PathBuf,
    /// Edge list format.
    #[arg(long, default_value = "snap", value_parser = parse_format)]
    format: EdgeListFormat,
    /// Optional key=value manifest the parsed dataset must match.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Number of add/delete intervals.
    #[arg(long, default_value_t = 4)]
    intervals: usize,
    /// Percent of vertices added per interval.
    #[arg(long, default_value_t = 25.0)]
    add: f64,
    /// Percent of vertices deleted per interval.
    #[arg(long, default_value_t = 5.0)]
    delete: f64,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct ReplayArgs {
    /// Trace file in the JSON lines event format.
    #[arg(long)]
    trace: PathBuf,
    /// Capture a metrics row every N events (0 = final state only).
    #[arg(long, default_value_t = 0)]
    interval_every: u64,
    #[command(flatten)]
    common: CommonArgs,
}

fn parse_algo(s: &str) -> Result<Algo, String> {
    s.parse()
}
fn parse_format(s: &str) -> Result<EdgeListFormat, String> {
    s.parse()
}
fn parse_gate(s: &str) -> Result<GateDirection, String> {
    s.parse()
}
fn parse_mode(s: &str) -> Result<RunMode, String> {
    s.parse()
}

fn build_spec(args: &RunArgs) -> RunSpec {
    let mut spec = RunSpec::new(&args.dataset, args.format);
    spec.manifest = args.manifest.clone();
    spec.scenario = ScenarioConfig {
        add_percent: args.add,
        delete_vertex_percent: args.delete,
        intervals: args.intervals,
        ..ScenarioConfig::default()
    };
    apply_common(&mut spec, &args.common);
    spec
}

fn apply_common(spec: &mut RunSpec, c: &CommonArgs) {
    spec.algo = c.algo;
    spec.maxcap = c.maxcap;
    spec.tolerance = c.tolerance;
    spec.dest_param = c.dest_param;
    spec.seed = c.seed;
    spec.gate_direction = c.gate_direction;
    spec.audit = c.audit;
    spec.mode = match c.mode {
        RunMode::InProcess => RunMode::InProcess,
        RunMode::Distributed { .. } => RunMode::Distributed {
            workers: c.workers.max(1),
        },
    };
}

/// Bad input is an operator mistake (exit 2); everything later is a runtime
/// failure (exit 1).
fn exit_for(e: &Error) -> ExitCode {
    match e {
        Error::Config(_)
        | Error::Parse { .. }
        | Error::EmptyFile(_)
        | Error::ManifestMismatch(_)
        | Error::Schedule(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<(), Error> = match &cli.command {
        Command::Run(args) => {
            let spec = build_spec(args);
            runner::run_to_dir(&spec, &args.common.out).map(|art| {
                println!(
                    "done: {} events, {} partitions, artifacts in {}",
                    art.out.series.last().map_or(0, |r| r.seq),
                    art.final_k,
                    args.common.out.display()
                );
            })
        }
        Command::Compare(args) => {
            let spec = build_spec(args);
            runner::compare(&spec, &args.common.out).map(|rows| {
                for r in rows {
                    println!(
                        "{:<6} k={} edge_cut={:.6} imbalance={:.3}",
                        r.algo.as_str(),
                        r.final_k,
                        r.edge_cut_ratio,
                        r.load_imbalance
                    );
                }
            })
        }
        Command::Replay(args) => {
            let mut spec = RunSpec::new("-", EdgeListFormat::Snap);
            apply_common(&mut spec, &args.common);
            runner::replay_trace(&spec, &args.trace, args.interval_every).map(|art| {
                println!(
                    "replayed: {} vertices placed across {} partitions",
                    art.placements.len(),
                    art.final_k
                );
            })
        }
        Command::Report { dir } => runner::report_dir(dir).map(|text| print!("{text}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_for(&e)
        }
    }
}
