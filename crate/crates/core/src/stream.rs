//! Graph loader and stream generator: turns a dataset into a mutation
//! schedule implementing the interval scenario (add a slice of the dataset,
//! then delete a sampled slice, per interval).

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{vertex_order, Dataset, Edge, EventKind, GraphEvent, StreamOrder, VertexId};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    /// Percentage of the dataset's vertices added per interval.
    pub add_percent: f64,
    /// Percentage of the dataset's vertices deleted per interval.
    pub delete_vertex_percent: f64,
    /// Percentage of the dataset's edges deleted per interval.
    pub delete_edge_percent: f64,
    pub intervals: usize,
    pub order_seed: u64,
    pub delete_seed: u64,
    /// When set, deletions never target vertices added in the same interval.
    pub delete_stable_only: bool,
}

impl Default for ScenarioConfig {
    fn default() -> ScenarioConfig {
        ScenarioConfig {
            add_percent: 25.0,
            delete_vertex_percent: 5.0,
            delete_edge_percent: 0.0,
            intervals: 4,
            order_seed: 0,
            delete_seed: 1,
            delete_stable_only: false,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("add_percent", self.add_percent),
            ("delete_vertex_percent", self.delete_vertex_percent),
            ("delete_edge_percent", self.delete_edge_percent),
        ] {
            if !(0.0..=100.0).contains(&v) {
                return Err(Error::Config(format!("{name} must be in [0, 100], got {v}")));
            }
        }
        if self.intervals == 0 {
            return Err(Error::Config("intervals must be >= 1".into()));
        }
        if self.add_percent * self.intervals as f64 > 100.0 + 1e-9 {
            return Err(Error::Config(
                "intervals * add_percent must not exceed 100".into(),
            ));
        }
        Ok(())
    }
}

/// An ordered event stream with interval boundaries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub events: Vec<GraphEvent>,
    /// Event counts at the end of each interval (strictly increasing).
    pub interval_marks: Vec<u64>,
    /// Event counts at the end of each interval's add phase.
    pub add_phase_marks: Vec<u64>,
}

/// Splits `total * percent/100` across intervals: floor per interval, with
/// the final interval absorbing the remainder.
fn per_interval_counts(total: usize, percent: f64, intervals: usize) -> Vec<usize> {
    let overall = (total as f64 * percent * intervals as f64 / 100.0).floor() as usize;
    let base = overall / intervals;
    let mut counts = vec![base; intervals];
    counts[intervals - 1] += overall - base * intervals;
    counts
}

/// Live-vertex tracker with O(1) uniform sampling.
#[derive(Default)]
struct LivePool {
    items: Vec<VertexId>,
    pos: HashMap<VertexId, usize>,
}

impl LivePool {
    fn insert(&mut self, v: VertexId) {
        self.pos.insert(v, self.items.len());
        self.items.push(v);
    }

    fn remove(&mut self, v: VertexId) -> bool {
        let Some(i) = self.pos.remove(&v) else {
            return false;
        };
        let last = self.items.pop().unwrap();
        if last != v {
            self.items[i] = last;
            self.pos.insert(last, i);
        }
        true
    }

    fn contains(&self, v: VertexId) -> bool {
        self.pos.contains_key(&v)
    }

    fn sample(&self, rng: &mut impl Rng) -> Option<VertexId> {
        if self.items.is_empty() {
            return None;
        }
        Some(self.items[rng.gen_range(0..self.items.len())])
    }

    fn len(&self) -> usize {
        self.items.len()
    }
}

/// Builds the interval schedule: per interval, the next slice of the seeded
/// vertex permutation arrives (each vertex with its full adjacency), then a
/// sample of currently-live vertices (and optionally edges) is deleted.
pub fn build_schedule(d: &Dataset, cfg: &ScenarioConfig) -> Result<Schedule> {
    cfg.validate()?;
    let order = vertex_order(
        d.vertex_count(),
        StreamOrder::Shuffled {
            seed: cfg.order_seed,
        },
    );
    let n_add = per_interval_counts(d.vertex_count(), cfg.add_percent, cfg.intervals);
    let n_del = per_interval_counts(d.vertex_count(), cfg.delete_vertex_percent, cfg.intervals);
    let n_del_edge = per_interval_counts(d.edge_count(), cfg.delete_edge_percent, cfg.intervals);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.delete_seed);
    let mut events = Vec::new();
    let mut interval_marks = Vec::new();
    let mut add_phase_marks = Vec::new();
    let mut live = LivePool::default();
    let mut cursor = 0usize;
    let mut seq = 0u64;
    for i in 0..cfg.intervals {
        let mut added_now = Vec::new();
        for _ in 0..n_add[i] {
            let v = order[cursor];
            cursor += 1;
            events.push(GraphEvent::add(seq, v, d.adjacency[v.0 as usize].clone()));
            seq += 1;
            if cfg.delete_stable_only {
                added_now.push(v);
            } else {
                live.insert(v);
            }
        }
        add_phase_marks.push(seq);
        if n_del[i] > live.len() + added_now.len() {
            return Err(Error::Schedule(format!(
                "interval {i} wants {} deletions but only {} vertices are live",
                n_del[i],
                live.len() + added_now.len()
            )));
        }
        for _ in 0..n_del[i] {
            let victim = live
                .sample(&mut rng)
                .ok_or_else(|| Error::Schedule(format!("interval {i}: no stable vertex left")))?;
            live.remove(victim);
            events.push(GraphEvent::delete_vertex(seq, victim));
            seq += 1;
        }
        for _ in 0..n_del_edge[i] {
            if let Some(e) = sample_live_edge(d, &live, &mut rng) {
                events.push(GraphEvent::delete_edge(seq, e));
                seq += 1;
            }
        }
        for v in added_now {
            live.insert(v);
        }
        interval_marks.push(seq);
    }
    Ok(Schedule {
        events,
        interval_marks,
        add_phase_marks,
    })
}

/// Rejection-samples an edge whose endpoints are both live. Bounded tries;
/// deletion of a sampled edge is not tracked, so duplicates are possible
/// (the engine treats a repeat as a warning no-op).
fn sample_live_edge(d: &Dataset, live: &LivePool, rng: &mut impl Rng) -> Option<Edge> {
    for _ in 0..200 {
        let v = live.sample(rng)?;
        let nbrs = &d.adjacency[v.0 as usize];
        if nbrs.is_empty() {
            continue;
        }
        let u = nbrs[rng.gen_range(0..nbrs.len())];
        if live.contains(u) {
            return Edge::new(v, u);
        }
    }
    None
}

/// Receives an ordered event stream.
pub trait EventSink {
    fn accept(&mut self, ev: &GraphEvent) -> Result<()>;
    fn interval_end(&mut self, _interval: usize) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplayReport {
    pub delivered: u64,
    pub intervals_fired: usize,
}

/// Delivers schedule events to `sink` in seq order, firing interval
/// callbacks at the marks.
pub fn replay(schedule: &Schedule, sink: &mut impl EventSink) -> Result<ReplayReport> {
    let mut delivered = 0u64;
    let mut intervals_fired = 0usize;
    let mut marks = schedule.interval_marks.iter().copied().peekable();
    for ev in &schedule.events {
        sink.accept(ev).map_err(|e| Error::Sink {
            seq: ev.seq,
            msg: e.to_string(),
        })?;
        delivered += 1;
        while marks.peek() == Some(&delivered) {
            marks.next();
            sink.interval_end(intervals_fired)?;
            intervals_fired += 1;
        }
    }
    Ok(ReplayReport {
        delivered,
        intervals_fired,
    })
}

/// One JSON-lines trace record.
#[derive(Serialize, Deserialize)]
struct TraceLine {
    seq: u64,
    op: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    v: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nbrs: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    u: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    w: Option<u64>,
}

pub fn export_trace(events: &[GraphEvent], mut out: impl Write) -> Result<()> {
    for ev in events {
        let line = match &ev.kind {
            EventKind::AddVertex { vertex, neighbors } => TraceLine {
                seq: ev.seq,
                op: "add".into(),
                v: Some(vertex.0),
                nbrs: Some(neighbors.iter().map(|n| n.0).collect()),
                u: None,
                w: None,
            },
            EventKind::DeleteVertex { vertex } => TraceLine {
                seq: ev.seq,
                op: "delv".into(),
                v: Some(vertex.0),
                nbrs: None,
                u: None,
                w: None,
            },
            EventKind::DeleteEdge { edge } => TraceLine {
                seq: ev.seq,
                op: "dele".into(),
                v: None,
                nbrs: None,
                u: Some(edge.src.0),
                w: Some(edge.dst.0),
            },
        };
        serde_json::to_writer(&mut out, &line)?;
        writeln!(out)?;
    }
    Ok(())
}

pub fn import_trace(path: &Path) -> Result<Vec<GraphEvent>> {
    let file = std::fs::File::open(path)?;
    let mut events = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t: TraceLine = serde_json::from_str(&line)?;
        let bad = |field: &str| Error::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            msg: format!("op {:?} missing field {field}", t.op),
        };
        let kind = match t.op.as_str() {
            "add" => EventKind::AddVertex {
                vertex: VertexId(t.v.ok_or_else(|| bad("v"))?),
                neighbors: t
                    .nbrs
                    .clone()
                    .ok_or_else(|| bad("nbrs"))?
                    .into_iter()
                    .map(VertexId)
                    .collect(),
            },
            "delv" => EventKind::DeleteVertex {
                vertex: VertexId(t.v.ok_or_else(|| bad("v"))?),
            },
            "dele" => EventKind::DeleteEdge {
                edge: Edge::new(
                    VertexId(t.u.ok_or_else(|| bad("u"))?),
                    VertexId(t.w.ok_or_else(|| bad("w"))?),
                )
                .ok_or_else(|| bad("non-loop edge"))?,
            },
            other => {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: idx + 1,
                    msg: format!("unknown op {other:?}"),
                })
            }
        };
        events.push(GraphEvent {
            seq: t.seq,
            kind,
        });
    }
    Ok(events)
}
