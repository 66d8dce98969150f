//! Property tests over the spec-level invariants.

use std::collections::BTreeMap;

use proptest::prelude::*;

use sdp_core::assign;
use sdp_core::engine::{run_stream, Engine, EngineConfig, NullObserver};
use sdp_core::graph::{
    dataset_to_add_events, parse_edge_list, write_snap, Dataset, Edge, EdgeListFormat,
    GraphEvent, StreamOrder, VertexId,
};
use sdp_core::state::{PartitionId, PartitionStats, PartitionSummary};
use sdp_core::stream::{build_schedule, ScenarioConfig};

#[derive(Debug, Clone)]
enum Op {
    Place { id: u64, nbrs: Vec<u64>, part: usize },
    DeleteVertex { id: u64 },
    DeleteEdge { a: u64, b: u64 },
}

fn op_strategy() -> impl Strategy<Value = Op> {
    prop_oneof![
        5 => (0..200u64, proptest::collection::vec(0..200u64, 0..5), 0..4usize)
            .prop_map(|(id, nbrs, part)| Op::Place { id, nbrs, part }),
        2 => (0..200u64).prop_map(|id| Op::DeleteVertex { id }),
        2 => (0..200u64, 0..200u64).prop_map(|(a, b)| Op::DeleteEdge { a, b }),
    ]
}

fn apply_ops(ops: &[Op]) -> PartitionSummary {
    let mut s = PartitionSummary::new();
    for _ in 0..3 {
        s.add_partition();
    }
    let parts: Vec<PartitionId> = s.live_partitions().collect();
    for op in ops {
        match op {
            Op::Place { id, nbrs, part } => {
                let v = VertexId(*id);
                if s.placement_of(v).is_some() {
                    continue;
                }
                let mut nbrs: Vec<VertexId> =
                    nbrs.iter().map(|&n| VertexId(n)).filter(|&n| n != v).collect();
                nbrs.dedup();
                s.place_vertex(parts[*part], v, &nbrs).unwrap();
            }
            Op::DeleteVertex { id } => s.delete_vertex(VertexId(*id)),
            Op::DeleteEdge { a, b } => {
                if let Some(e) = Edge::new(VertexId(*a), VertexId(*b)) {
                    s.delete_edge(e);
                }
            }
        }
    }
    s
}

proptest! {
    /// Incremental stats always equal the from-scratch recomputation, and
    /// the structural invariants hold, under arbitrary op sequences.
    #[test]
    fn stats_never_drift(ops in proptest::collection::vec(op_strategy(), 0..120)) {
        let s = apply_ops(&ops);
        prop_assert_eq!(s.stats(), s.recompute_stats());
        prop_assert!(s.check_invariants().is_ok());
    }

    /// Cut half-edges pair up: the total is always even.
    #[test]
    fn cut_half_edges_are_even(ops in proptest::collection::vec(op_strategy(), 0..120)) {
        let s = apply_ops(&ops);
        prop_assert_eq!(s.total_cut_half_edges() % 2, 0);
    }

    /// Placement export lines parse back into the exact placement map.
    #[test]
    fn placement_export_round_trips(ops in proptest::collection::vec(op_strategy(), 0..120)) {
        let s = apply_ops(&ops);
        let mut buf = Vec::new();
        s.export_placements(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut parsed = BTreeMap::new();
        for line in text.lines() {
            let (v, p) = line.split_once(',').unwrap();
            parsed.insert(
                VertexId(v.parse().unwrap()),
                PartitionId(p.parse().unwrap()),
            );
        }
        let expected: BTreeMap<VertexId, PartitionId> = s.placements().collect();
        prop_assert_eq!(parsed, expected);
    }

    /// The intervene decision is invariant under uniform load scaling with
    /// edges_seen/cuts_seen fixed.
    #[test]
    fn gate_is_scale_invariant(
        loads in proptest::collection::vec(0..500u64, 1..6),
        c in 2..20u64,
        edges in 1..10_000u64,
        cuts_offset in 0..10_000u64,
    ) {
        let cuts = cuts_offset.min(edges);
        let stats = |scale: u64| -> BTreeMap<PartitionId, PartitionStats> {
            loads.iter().enumerate().map(|(i, &l)| {
                (PartitionId(i as u32), PartitionStats {
                    internal_edges: l * scale,
                    cut_edges: 0,
                    vertex_count: 1,
                })
            }).collect()
        };
        let base = assign::balance_snapshot(&stats(1), edges, cuts);
        let scaled = assign::balance_snapshot(&stats(c), edges, cuts);
        prop_assert_eq!(base.intervene, scaled.intervene);
    }

    /// Dataset serialization round-trips through the plain edge-list format.
    #[test]
    fn snap_round_trip(raw in proptest::collection::vec((0..80u64, 0..80u64), 1..150)) {
        let d = Dataset::from_edges("prop", &raw);
        prop_assume!(d.edge_count() > 0);
        let mut buf = Vec::new();
        write_snap(&d, &mut buf).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("prop.txt");
        std::fs::write(&p, buf).unwrap();
        let back = parse_edge_list(&p, EdgeListFormat::Snap).unwrap();
        prop_assert_eq!(back.edge_count(), d.edge_count());
        prop_assert_eq!(back.vertex_count(), d.vertex_count());
    }

    /// The schedule's add-event total follows the floor arithmetic and every
    /// event stream runs cleanly through a fresh engine.
    #[test]
    fn schedules_run_clean(
        n in 20..120usize,
        intervals in 1..5usize,
        add in 5.0..25.0f64,
        del in 0.0..4.0f64,
        seed in 0..50u64,
    ) {
        let edges: Vec<(u64, u64)> = (0..n as u64).map(|i| (i, (i + 1) % n as u64)).collect();
        let d = Dataset::from_edges("ring", &edges);
        let cfg = ScenarioConfig {
            add_percent: add,
            delete_vertex_percent: del,
            delete_edge_percent: 0.0,
            intervals,
            order_seed: seed,
            delete_seed: seed + 1,
            delete_stable_only: false,
        };
        prop_assume!(cfg.validate().is_ok());
        let schedule = match build_schedule(&d, &cfg) {
            Ok(s) => s,
            // Deletions can outpace additions for small add percentages.
            Err(sdp_core::Error::Schedule(_)) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let adds = schedule.events.iter().filter(|e| {
            matches!(e.kind, sdp_core::graph::EventKind::AddVertex { .. })
        }).count();
        let expected = ((n as f64) * add * intervals as f64 / 100.0).floor() as usize;
        prop_assert_eq!(adds, expected);
        let mut ecfg = EngineConfig::for_tests(10);
        ecfg.rng_seed = seed;
        let (engine, _) =
            run_stream(&schedule.events, ecfg, &schedule.interval_marks, &mut NullObserver)
                .unwrap();
        prop_assert!(engine.summary().check_invariants().is_ok());
        prop_assert_eq!(
            engine.edges_seen(),
            engine.summary().stored_half_edges() + engine.summary().deleted_half_edges()
        );
    }

    /// Any add-only stream leaves the engine with every vertex placed in a
    /// live partition and live-edge parity with the source dataset.
    #[test]
    fn add_only_streams_place_everything(
        raw in proptest::collection::vec((0..60u64, 0..60u64), 1..100),
        seed in 0..20u64,
    ) {
        let d = Dataset::from_edges("prop", &raw);
        let events: Vec<GraphEvent> =
            dataset_to_add_events(&d, StreamOrder::Shuffled { seed });
        let mut cfg = EngineConfig::for_tests(8);
        cfg.rng_seed = seed;
        let mut engine = Engine::new(cfg);
        for ev in &events {
            engine.process_event(ev).unwrap();
        }
        prop_assert_eq!(engine.summary().live_vertex_count(), d.vertex_count());
        prop_assert_eq!(engine.summary().live_edge_count(), d.edge_count() as u64);
        for (v, p) in engine.summary().placements() {
            prop_assert!(engine.summary().is_live(p), "{} on retired partition", v);
        }
    }
}
