//! Acceptance gate: one test per headline criterion, each ending in a single
//! PASS/FAIL line. Run with `cargo test --test acceptance -- --nocapture`
//! to see the lines for passing criteria too.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sdp_core::assign;
use sdp_core::engine::{run_into, run_stream, Engine, EngineConfig, NullObserver};
use sdp_core::graph::{dataset_to_add_events, Dataset, Edge, GraphEvent, StreamOrder, VertexId};
use sdp_core::metrics;
use sdp_core::net;
use sdp_core::runner::{self, default_maxcap, RunSpec};
use sdp_core::scale::{self, ScalingConfig};
use sdp_core::state::{CapacityConfig, PartitionId, PartitionSummary};
use sdp_core::stream::{build_schedule, ScenarioConfig};
use sdp_core::synthetic;

fn pass(name: &str, detail: String) {
    println!("[PASS] {name}: {detail}");
}

fn fail(name: &str, detail: String) -> ! {
    panic!("[FAIL] {name}: {detail}");
}

fn v(id: u64) -> VertexId {
    VertexId(id)
}

fn cfg_with(maxcap: u64, seed: u64) -> EngineConfig {
    let cap = CapacityConfig::new(maxcap, 20.0, 5.0).unwrap();
    let mut cfg = EngineConfig::new(ScalingConfig::from_capacity(&cap).unwrap());
    cfg.rng_seed = seed;
    cfg
}

/// Criterion 1: incremental stats equal the from-scratch recomputation on
/// at least 100 fuzzed mixed event streams, checked every 100 events, with
/// the placement/vertex-set inverse invariant held throughout.
#[test]
fn acceptance_oracle_equivalence() {
    const NAME: &str = "oracle-equivalence";
    let mut checkpoints = 0u64;
    for stream_seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed);
        let mut s = PartitionSummary::new();
        let extra = rng.gen_range(0..5usize);
        for _ in 0..extra.min(4) {
            s.add_partition();
        }
        let parts: Vec<PartitionId> = s.live_partitions().collect();
        let n_events = rng.gen_range(200..=1000usize);
        let mut next_id = 0u64;
        let mut placed: Vec<VertexId> = Vec::new();
        for ev in 0..n_events {
            match rng.gen_range(0..10u32) {
                0..=5 => {
                    let id = v(next_id);
                    next_id += 1;
                    let pool = next_id + 20;
                    let mut nbrs: Vec<VertexId> = (0..rng.gen_range(0..6usize))
                        .map(|_| v(rng.gen_range(0..pool)))
                        .collect();
                    nbrs.retain(|&u| u != id);
                    let p = parts[rng.gen_range(0..parts.len())];
                    s.place_vertex(p, id, &nbrs).unwrap();
                    placed.push(id);
                }
                6..=7 => {
                    // Sometimes a vertex that was never placed: tolerated no-op.
                    let victim = if !placed.is_empty() && rng.gen_bool(0.8) {
                        let i = rng.gen_range(0..placed.len());
                        placed.swap_remove(i)
                    } else {
                        v(rng.gen_range(0..next_id + 50))
                    };
                    s.delete_vertex(victim);
                    placed.retain(|&u| u != victim);
                }
                _ => {
                    let a = v(rng.gen_range(0..next_id + 20));
                    let b = v(rng.gen_range(0..next_id + 20));
                    if let Some(e) = Edge::new(a, b) {
                        s.delete_edge(e);
                    }
                }
            }
            if (ev + 1) % 100 == 0 {
                if s.stats() != s.recompute_stats() {
                    fail(
                        NAME,
                        format!("stream {stream_seed}: stats drifted at event {}", ev + 1),
                    );
                }
                if let Err(e) = s.check_invariants() {
                    fail(NAME, format!("stream {stream_seed}: {e}"));
                }
                checkpoints += 1;
            }
        }
        if s.stats() != s.recompute_stats() {
            fail(NAME, format!("stream {stream_seed}: final stats drifted"));
        }
        s.check_invariants()
            .unwrap_or_else(|e| fail(NAME, format!("stream {stream_seed}: {e}")));
    }
    pass(
        NAME,
        format!("100 fuzzed mixed streams, {checkpoints} checkpoints, zero drift"),
    );
}

/// Step-by-step reimplementation of the decision rule over its own shadow
/// state, sharing only the rng seed with the engine.
struct DecisionOracle {
    placement: HashMap<VertexId, PartitionId>,
    adjacency: HashMap<VertexId, Vec<VertexId>>,
    partitions: Vec<PartitionId>,
    rng: ChaCha8Rng,
}

impl DecisionOracle {
    fn loads(&self) -> BTreeMap<PartitionId, u64> {
        let mut loads: BTreeMap<PartitionId, u64> =
            self.partitions.iter().map(|&p| (p, 0)).collect();
        let mut counted: HashSet<(VertexId, VertexId)> = HashSet::new();
        for (&a, nbrs) in &self.adjacency {
            for &b in nbrs {
                let key = (a.min(b), a.max(b));
                if !counted.insert(key) {
                    continue;
                }
                let (pa, pb) = match (self.placement.get(&a), self.placement.get(&b)) {
                    (Some(&pa), Some(&pb)) => (pa, pb),
                    _ => continue,
                };
                if pa == pb {
                    *loads.get_mut(&pa).unwrap() += 1;
                } else {
                    *loads.get_mut(&pa).unwrap() += 1;
                    *loads.get_mut(&pb).unwrap() += 1;
                }
            }
        }
        loads
    }

    fn decide(&mut self, vertex: VertexId, neighbors: &[VertexId]) -> PartitionId {
        let conn: BTreeMap<PartitionId, usize> = self
            .partitions
            .iter()
            .map(|&p| {
                let c = neighbors
                    .iter()
                    .filter(|&&u| self.placement.get(&u) == Some(&p))
                    .count();
                (p, c)
            })
            .collect();
        let best = *conn.values().max().unwrap();
        let choice = if best == 0 {
            self.partitions[self.rng.gen_range(0..self.partitions.len())]
        } else {
            let loads = self.loads();
            conn.iter()
                .filter(|(_, &c)| c == best)
                .map(|(&p, _)| p)
                .min_by_key(|&p| (loads[&p], p))
                .unwrap()
        };
        self.placement.insert(vertex, choice);
        self.adjacency.insert(vertex, neighbors.to_vec());
        choice
    }
}

/// Criterion 2: with the gate disabled, every engine decision on 50 random
/// 200-vertex streams matches the brute-force oracle exactly.
#[test]
fn acceptance_assignment_oracle() {
    const NAME: &str = "assignment-oracle";
    let mut decisions = 0u64;
    for stream_seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + stream_seed);
        let n = 200usize;
        let mut edges = Vec::new();
        for a in 0..n as u64 {
            for _ in 0..rng.gen_range(1..5u32) {
                let b = rng.gen_range(0..n as u64);
                if a != b {
                    edges.push((a, b));
                }
            }
        }
        let d = Dataset::from_edges("oracle", &edges);
        let events = dataset_to_add_events(&d, StreamOrder::Shuffled { seed: stream_seed });
        let k = 2 + (stream_seed % 4) as usize;
        let mut cfg = cfg_with(u64::MAX / 4, 77 + stream_seed);
        cfg.balancing = false;
        cfg.elastic = false;
        let mut engine = Engine::with_fixed_partitions(cfg, k);
        let mut oracle = DecisionOracle {
            placement: HashMap::new(),
            adjacency: HashMap::new(),
            partitions: engine.summary().live_partitions().collect(),
            rng: ChaCha8Rng::seed_from_u64(cfg.rng_seed),
        };
        for ev in &events {
            let (vertex, nbrs) = match &ev.kind {
                sdp_core::graph::EventKind::AddVertex { vertex, neighbors } => {
                    (*vertex, neighbors.clone())
                }
                _ => unreachable!(),
            };
            let expected = oracle.decide(vertex, &nbrs);
            let got = engine.process_event(ev).unwrap().unwrap();
            if got.partition != expected {
                fail(
                    NAME,
                    format!(
                        "stream {stream_seed} seq {}: engine chose {} (reason {}), oracle {}",
                        ev.seq,
                        got.partition,
                        got.reason.as_str(),
                        expected
                    ),
                );
            }
            decisions += 1;
        }
    }
    pass(NAME, format!("{decisions} decisions matched across 50 streams"));
}

/// Criterion 3: the balancing and scaling formulas reproduce every
/// hand-derived example to 1e-9.
#[test]
fn acceptance_formula_spot_checks() {
    const NAME: &str = "formula-spot-checks";
    let close = |got: f64, want: f64| (got - want).abs() <= 1e-9 * want.abs().max(1.0);
    let stats_2 = |l0: u64, l1: u64| {
        let mut s = BTreeMap::new();
        for (i, l) in [l0, l1].into_iter().enumerate() {
            s.insert(
                PartitionId(i as u32),
                sdp_core::state::PartitionStats {
                    internal_edges: l,
                    cut_edges: 0,
                    vertex_count: 1,
                },
            );
        }
        s
    };
    let snap = assign::balance_snapshot(&stats_2(10, 4), 20, 10);
    for (label, got, want) in [
        ("load_dev", snap.load_dev, 3.0),
        ("w_dev", snap.w_dev, 6.0),
        ("th", snap.th, 3.0),
        ("avg_d", snap.avg_d, 3.0),
    ] {
        if !close(got, want) {
            fail(NAME, format!("{label}: got {got}, want {want}"));
        }
    }
    if snap.intervene {
        fail(NAME, "avg_d 3 > th 3 must be false".into());
    }
    let snap = assign::balance_snapshot(&stats_2(10, 4), 20, 16);
    if !close(snap.w_dev, 3.75) || !close(snap.th, 0.75) || !snap.intervene {
        fail(NAME, format!("trip case: w_dev {}, th {}", snap.w_dev, snap.th));
    }
    let scfg =
        ScalingConfig::from_capacity(&CapacityConfig::new(100, 20.0, 5.0).unwrap()).unwrap();
    if !close(scfg.low_load_threshold, 20.0) || !close(scfg.destination_threshold, 95.0) {
        fail(
            NAME,
            format!(
                "l {} / destination {}",
                scfg.low_load_threshold, scfg.destination_threshold
            ),
        );
    }
    let boundary =
        ScalingConfig::from_capacity(&CapacityConfig::new(25, 20.0, 5.0).unwrap()).unwrap();
    if !scale::should_scale_out(100, 4, &boundary) || scale::should_scale_out(99, 4, &boundary) {
        fail(NAME, "addingThreshold boundary 25 <= 100/4 mishandled".into());
    }
    pass(NAME, "all hand-derived values reproduced within 1e-9".into());
}

fn final_ratio_fixed_k(
    events: &[GraphEvent],
    mut cfg: EngineConfig,
    k: usize,
    assigner: sdp_core::engine::Assigner,
    d: &Dataset,
) -> f64 {
    cfg.elastic = false;
    cfg.assigner = match assigner {
        sdp_core::engine::Assigner::Ldg { .. } => sdp_core::engine::Assigner::Ldg {
            vertex_capacity: runner::ldg_vertex_capacity(d.vertex_count(), k),
        },
        other => other,
    };
    let mut engine = Engine::with_fixed_partitions(cfg, k);
    let out = run_into(&mut engine, events, &[], &mut NullObserver).unwrap();
    out.series.last().unwrap().edge_cut_ratio
}

/// Criterion 4: on both full datasets, the streaming partitioner's final
/// edge-cut ratio beats hash by at least 40% and stays within 25% of the
/// greedy baseline, all at the same final k.
#[test]
fn acceptance_edge_cut_trend() {
    const NAME: &str = "edge-cut-trend";
    let mut details = Vec::new();
    for d in [synthetic::mesh_4200(), synthetic::collab_5242()] {
        let events = dataset_to_add_events(&d, StreamOrder::Shuffled { seed: 5 });
        let cfg = cfg_with(default_maxcap(d.edge_count()), 55);
        let (engine, out) = run_stream(&events, cfg, &[], &mut NullObserver).unwrap();
        let k = engine.summary().partition_count();
        let ours = out.series.last().unwrap().edge_cut_ratio;
        let hash =
            final_ratio_fixed_k(&events, cfg, k, sdp_core::engine::Assigner::Hash, &d);
        let ldg = final_ratio_fixed_k(
            &events,
            cfg,
            k,
            sdp_core::engine::Assigner::Ldg { vertex_capacity: 0 },
            &d,
        );
        if ours > 0.6 * hash {
            fail(
                NAME,
                format!("{}: ratio {ours:.4} > 0.6 x hash {hash:.4} at k={k}", d.name),
            );
        }
        if ours > 1.25 * ldg {
            fail(
                NAME,
                format!("{}: ratio {ours:.4} > 1.25 x ldg {ldg:.4} at k={k}", d.name),
            );
        }
        details.push(format!(
            "{} k={k} ours={ours:.4} hash={hash:.4} ldg={ldg:.4}",
            d.name
        ));
    }
    pass(NAME, details.join("; "));
}

/// Criterion 5: the 4-interval scenario on the 4200-vertex dataset adds 1050
/// and deletes 210 vertices per interval, and the edge-cut ratio drops over
/// the deletion step in at least 3 of 4 intervals.
#[test]
fn acceptance_interval_scenario() {
    const NAME: &str = "interval-scenario";
    let d = synthetic::mesh_4200();
    let scenario = ScenarioConfig::default();
    let schedule = build_schedule(&d, &scenario).unwrap();
    let mut prev = 0u64;
    for (i, (&add_mark, &end_mark)) in schedule
        .add_phase_marks
        .iter()
        .zip(&schedule.interval_marks)
        .enumerate()
    {
        let adds = add_mark - prev;
        let dels = end_mark - add_mark;
        if adds != 1050 || dels != 210 {
            fail(NAME, format!("interval {i}: {adds} adds / {dels} deletes"));
        }
        prev = end_mark;
    }
    // Four starting partitions with capacity well under |E|, mirroring a
    // fixed starting machine pool; keeps scale in/out active during the run.
    let cfg = cfg_with(1000, 13);
    let mut engine = Engine::with_fixed_partitions(cfg, 4);
    let mut after_add = Vec::new();
    let mut after_del = Vec::new();
    for ev in &schedule.events {
        engine.process_event(ev).unwrap();
        let n = engine.event_count();
        if schedule.add_phase_marks.contains(&n) {
            after_add.push(metrics::edge_cut_ratio(&engine));
        }
        if schedule.interval_marks.contains(&n) {
            engine.consolidate(&mut NullObserver).unwrap();
            after_del.push(metrics::edge_cut_ratio(&engine));
        }
    }
    let drops = after_add
        .iter()
        .zip(&after_del)
        .filter(|(a, d)| d < a)
        .count();
    if drops < 3 {
        fail(
            NAME,
            format!(
                "ratio dropped over deletion in only {drops}/4 intervals (add {:?} vs del {:?})",
                after_add, after_del
            ),
        );
    }
    pass(
        NAME,
        format!("1050/210 per interval; deletion lowered the ratio in {drops}/4 intervals"),
    );
}

/// Criterion 6: enough partitions are added to hold the final edge count,
/// and the capacity check fires exactly when maxcap <= |E|/k.
#[test]
fn acceptance_scale_out_law() {
    const NAME: &str = "scale-out-law";
    let d = synthetic::mesh_4200();
    let events = dataset_to_add_events(&d, StreamOrder::Shuffled { seed: 2 });
    let maxcap = 4000u64;
    let cfg = cfg_with(maxcap, 3);
    let mut engine = Engine::new(cfg);
    let mut mismatches = 0u64;
    for ev in &events {
        let should = scale::should_scale_out(
            engine.summary().live_edge_count(),
            engine.summary().partition_count(),
            &cfg.scaling,
        );
        let before = engine.scaling_log().len();
        engine.process_event(ev).unwrap();
        let grew = engine.scaling_log().len() > before;
        if should != grew {
            mismatches += 1;
        }
    }
    if mismatches > 0 {
        fail(NAME, format!("{mismatches} add events disagreed with the capacity check"));
    }
    let adds = engine.scaling_log().len() as u64;
    let final_edges = engine.summary().live_edge_count();
    let needed = final_edges.div_ceil(maxcap).saturating_sub(1);
    if adds < needed {
        fail(NAME, format!("{adds} additions < required {needed}"));
    }
    pass(
        NAME,
        format!("{adds} partition additions for |E|={final_edges} (bound {needed}); check exact at every add"),
    );
}

/// Criterion 7: 200 fuzzed migrations conserve vertices and edges, never
/// push the destination past its threshold, and never increase the cut.
#[test]
fn acceptance_scale_in_safety() {
    const NAME: &str = "scale-in-safety";
    let scfg =
        ScalingConfig::from_capacity(&CapacityConfig::new(60, 40.0, 5.0).unwrap()).unwrap();
    let mut executed = 0u32;
    let mut seed = 0u64;
    while executed < 200 {
        seed += 1;
        assert!(seed < 5000, "could not reach 200 executed plans");
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
        let mut s = PartitionSummary::new();
        for _ in 0..rng.gen_range(1..5usize) {
            s.add_partition();
        }
        let parts: Vec<PartitionId> = s.live_partitions().collect();
        for id in 0..rng.gen_range(10..60u64) {
            let mut nbrs: Vec<VertexId> = (0..rng.gen_range(0..4usize))
                .map(|_| v(rng.gen_range(0..60)))
                .collect();
            nbrs.retain(|&u| u != v(id));
            s.place_vertex(parts[rng.gen_range(0..parts.len())], v(id), &nbrs)
                .unwrap();
        }
        let Some(plan) = scale::plan_scale_in(&s, &scfg) else {
            continue;
        };
        let vertices_before = s.live_vertex_count();
        let edges_before = s.live_edge_count();
        let cut_before = s.total_cut_half_edges();
        scale::execute_migration(&mut s, &plan).unwrap();
        let dest_load = s.stats_of(plan.destination).unwrap().load() as f64;
        if dest_load > scfg.destination_threshold {
            fail(
                NAME,
                format!("seed {seed}: destination load {dest_load} above threshold"),
            );
        }
        if s.live_vertex_count() != vertices_before || s.live_edge_count() != edges_before {
            fail(NAME, format!("seed {seed}: conservation violated"));
        }
        if s.total_cut_half_edges() > cut_before {
            fail(NAME, format!("seed {seed}: cut grew across migration"));
        }
        s.check_invariants()
            .unwrap_or_else(|e| fail(NAME, format!("seed {seed}: {e}")));
        executed += 1;
    }
    pass(NAME, format!("{executed} fuzzed migrations, all safe"));
}

/// Criterion 8: on two cliques joined by a few bridges, enabling the
/// balancing gate does not worsen the final load imbalance.
#[test]
fn acceptance_gate_imbalance() {
    const NAME: &str = "gate-imbalance";
    let d = synthetic::two_cliques(500, 10);
    let events = dataset_to_add_events(&d, StreamOrder::Shuffled { seed: 21 });
    let maxcap = default_maxcap(d.edge_count());
    let imbalance_with_gate = |balancing: bool| -> f64 {
        let mut cfg = cfg_with(maxcap, 401);
        cfg.balancing = balancing;
        let (_, out) = run_stream(&events, cfg, &[], &mut NullObserver).unwrap();
        let mut buf = Vec::new();
        metrics::write_csv(&out.series, &mut buf).unwrap();
        let csv = String::from_utf8(buf).unwrap();
        let last = csv.lines().last().unwrap();
        last.split(',').nth(3).unwrap().parse().unwrap()
    };
    let gated = imbalance_with_gate(true);
    let ungated = imbalance_with_gate(false);
    if gated > ungated {
        fail(
            NAME,
            format!("gated imbalance {gated:.3} > ungated {ungated:.3}"),
        );
    }
    pass(
        NAME,
        format!("gated imbalance {gated:.3} <= ungated {ungated:.3}"),
    );
}

/// Criterion 9: rerunning an identical spec reproduces the metrics CSV
/// byte for byte once the elapsed_ms column is dropped.
#[test]
fn acceptance_determinism() {
    const NAME: &str = "determinism";
    let tmp = tempfile::tempdir().unwrap();
    let d = synthetic::community("det", 800, 2400, 10, 0.1, 31);
    let mut buf = Vec::new();
    sdp_core::graph::write_snap(&d, &mut buf).unwrap();
    let dpath = tmp.path().join("det.txt");
    std::fs::write(&dpath, buf).unwrap();
    let mut spec = RunSpec::new(&dpath, sdp_core::graph::EdgeListFormat::Snap);
    spec.seed = 19;
    spec.audit = true;
    let strip_elapsed = |csv: &str| -> String {
        csv.lines()
            .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
            .collect::<Vec<_>>()
            .join("\n")
    };
    let mut snapshots = Vec::new();
    for run in 0..2 {
        let out = tmp.path().join(format!("run{run}"));
        runner::run_to_dir(&spec, &out).unwrap();
        let read = |f: &str| std::fs::read_to_string(out.join(f)).unwrap();
        snapshots.push((
            strip_elapsed(&read("metrics.csv")),
            read("placements.txt"),
            read("scaling.csv"),
            read("audit.csv"),
        ));
    }
    if snapshots[0] != snapshots[1] {
        fail(NAME, "artifacts differ between identical runs".into());
    }
    pass(
        NAME,
        "metrics, placements, scaling, and audit logs byte-identical across reruns".into(),
    );
}

/// Criterion 10: the full add-only trace through 2 socket workers yields a
/// shard union identical to the in-process placement map, and redelivered
/// messages apply once.
#[test]
fn acceptance_distributed_equivalence() {
    const NAME: &str = "distributed-equivalence";
    let d = synthetic::mesh_4200();
    let events = dataset_to_add_events(&d, StreamOrder::Shuffled { seed: 9 });
    let cfg = cfg_with(default_maxcap(d.edge_count()), 91);
    let mut reference = Engine::with_fixed_partitions(cfg, 2);
    run_into(&mut reference, &events, &[], &mut NullObserver).unwrap();
    let expected: BTreeMap<u64, u32> = reference
        .summary()
        .placements()
        .map(|(vx, p)| (vx.0, p.0))
        .collect();
    let (_, _, reports) = net::run_distributed(&events, cfg, &[], 2).unwrap();
    let mut union: BTreeMap<u64, u32> = BTreeMap::new();
    for r in &reports {
        for &vx in r.shard.keys() {
            if union.insert(vx.0, r.partition.0).is_some() {
                fail(NAME, format!("vertex {vx} owned by two shards"));
            }
        }
    }
    if union != expected {
        fail(
            NAME,
            format!(
                "shard union has {} placements, in-process run has {}",
                union.len(),
                expected.len()
            ),
        );
    }

    // Idempotence under redelivery.
    let handle = net::spawn_worker(PartitionId(0)).unwrap();
    let mut link = net::WorkerLink::connect(handle.addr).unwrap();
    let place = net::WireMessage::PlaceVertex {
        seq: 0,
        vertex: v(1),
        neighbors: vec![v(2)],
    };
    link.send_with_ack(&place).unwrap();
    link.send_with_ack(&place).unwrap();
    let batch = net::WireMessage::MigrateBatch {
        seq: 1,
        vertices: vec![(v(3), vec![v(1)])],
    };
    link.send_with_ack(&batch).unwrap();
    link.send_with_ack(&batch).unwrap();
    link.send_with_ack(&net::WireMessage::Shutdown {
        seq: 2,
        drop_shard: false,
    })
    .unwrap();
    let report = handle.join().unwrap();
    if report.shard.len() != 2 || report.duplicates_ignored != 2 {
        fail(
            NAME,
            format!(
                "redelivery: {} vertices, {} duplicates ignored",
                report.shard.len(),
                report.duplicates_ignored
            ),
        );
    }
    pass(
        NAME,
        format!(
            "{} placements identical across {} workers; redelivery applied once",
            union.len(),
            reports.len()
        ),
    );
}
