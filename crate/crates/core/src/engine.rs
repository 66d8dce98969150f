//! The single-writer event loop: scale-out check, balancing gate, assignment,
//! deletions, and summary maintenance in stream order.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::assign::{self, AssignmentDecision, BalanceSnapshot};
use crate::graph::{Edge, EventKind, GraphEvent, VertexId};
use crate::metrics::{self, MetricsRecord};
use crate::scale::{self, ScalingConfig};
use crate::state::{PartitionId, PartitionSummary};
use crate::{Error, Result};

/// Which way the balancing gate routes. `Prose` sends high imbalance to
/// min-load placement; `Listing` replays the inverted variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateDirection {
    Prose,
    Listing,
}

impl std::str::FromStr for GateDirection {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "prose" => Ok(GateDirection::Prose),
            "listing" => Ok(GateDirection::Listing),
            other => Err(format!("unknown gate direction {other:?} (expected prose|listing)")),
        }
    }
}

/// Placement strategy driving the AddVertex path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assigner {
    /// Gate plus connectivity argmax (the default pipeline).
    Streaming,
    /// Stateless hash of the vertex id over a fixed k.
    Hash,
    /// Greedy capacity-penalized connectivity over a fixed k.
    Ldg { vertex_capacity: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    pub scaling: ScalingConfig,
    pub gate_direction: GateDirection,
    /// Disables the balancing gate entirely when false (connectivity only).
    pub balancing: bool,
    pub rng_seed: u64,
    pub audit: bool,
    pub assigner: Assigner,
    /// When false the partition set is frozen: no scale-out, no
    /// consolidation. Baseline runs use this.
    pub elastic: bool,
}

impl EngineConfig {
    pub fn new(scaling: ScalingConfig) -> EngineConfig {
        EngineConfig {
            scaling,
            gate_direction: GateDirection::Prose,
            balancing: true,
            rng_seed: 0,
            audit: false,
            assigner: Assigner::Streaming,
            elastic: true,
        }
    }

    #[doc(hidden)]
    pub fn for_tests(maxcap: u64) -> EngineConfig {
        let cap = crate::state::CapacityConfig::new(maxcap, 20.0, 5.0).unwrap();
        EngineConfig::new(ScalingConfig::from_capacity(&cap).unwrap())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingAction {
    Add,
    Retire,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScalingEvent {
    pub seq: u64,
    pub action: ScalingAction,
    pub partition: PartitionId,
    pub k_after: usize,
    pub total_edges: u64,
}

/// One audit row per assignment decision.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditRow {
    pub seq: u64,
    pub vertex: VertexId,
    pub decision: AssignmentDecision,
    pub avg_d: f64,
    pub th: f64,
}

/// Callbacks fired by [`run_stream`]; the transport layer and tests hook in
/// here. All default to no-ops.
#[allow(unused_variables)]
pub trait RunObserver {
    fn on_placed(
        &mut self,
        seq: u64,
        vertex: VertexId,
        neighbors: &[VertexId],
        partition: PartitionId,
    ) -> Result<()> {
        Ok(())
    }
    fn on_vertex_deleted(&mut self, seq: u64, vertex: VertexId) -> Result<()> {
        Ok(())
    }
    fn on_edge_deleted(&mut self, seq: u64, edge: Edge) -> Result<()> {
        Ok(())
    }
    fn on_partition_added(&mut self, partition: PartitionId) -> Result<()> {
        Ok(())
    }
    fn on_migration(&mut self, plan: &scale::MigrationPlan) -> Result<()> {
        Ok(())
    }
    /// After every processed event; lets tests probe mid-stream state.
    fn after_event(&mut self, engine: &Engine) -> Result<()> {
        Ok(())
    }
}

/// No-op observer for plain in-process runs.
pub struct NullObserver;
impl RunObserver for NullObserver {}

pub struct Engine {
    cfg: EngineConfig,
    summary: PartitionSummary,
    /// Monotone count of adjacency references arrived (half-edge units).
    edges_seen: u64,
    event_count: u64,
    rng: ChaCha8Rng,
    scaling_log: Vec<ScalingEvent>,
    audit_log: Vec<AuditRow>,
}

impl Engine {
    pub fn new(cfg: EngineConfig) -> Engine {
        Engine {
            summary: PartitionSummary::new(),
            edges_seen: 0,
            event_count: 0,
            rng: ChaCha8Rng::seed_from_u64(cfg.rng_seed),
            scaling_log: Vec::new(),
            audit_log: Vec::new(),
            cfg,
        }
    }

    /// Starts with `k` pre-created partitions instead of one; used by the
    /// fixed-k baseline runs.
    pub fn with_fixed_partitions(cfg: EngineConfig, k: usize) -> Engine {
        let mut e = Engine::new(cfg);
        for _ in 1..k {
            e.summary.add_partition();
        }
        e
    }

    pub fn summary(&self) -> &PartitionSummary {
        &self.summary
    }

    #[doc(hidden)]
    pub fn summary_mut(&mut self) -> &mut PartitionSummary {
        &mut self.summary
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn event_count(&self) -> u64 {
        self.event_count
    }

    /// Half-edges arrived so far (each neighbor reference counts one).
    pub fn edges_seen(&self) -> u64 {
        self.edges_seen
    }

    /// Running count of cut half-edges (twice the number of cut edges);
    /// reflects deletions and migrations, not a monotone history.
    pub fn cuts_seen(&self) -> u64 {
        self.summary.total_cut_half_edges()
    }

    pub fn warn_count(&self) -> u64 {
        self.summary.warn_count()
    }

    pub fn scaling_log(&self) -> &[ScalingEvent] {
        &self.scaling_log
    }

    pub fn audit_log(&self) -> &[AuditRow] {
        &self.audit_log
    }

    fn gate_snapshot(&self) -> BalanceSnapshot {
        let mut snap =
            assign::balance_snapshot(&self.summary.stats(), self.edges_seen, self.cuts_seen());
        if self.summary.partition_count() <= 1 || !self.cfg.balancing {
            snap.intervene = false;
        } else if self.cfg.gate_direction == GateDirection::Listing {
            // The inverted variant: min-load placement on the quiet branch.
            snap.intervene = !snap.intervene;
        }
        snap
    }

    /// Processes one event in stream order. AddVertex returns the decision.
    pub fn process_event(&mut self, ev: &GraphEvent) -> Result<Option<AssignmentDecision>> {
        self.process_event_observed(ev, &mut NullObserver)
    }

    pub fn process_event_observed(
        &mut self,
        ev: &GraphEvent,
        observer: &mut dyn RunObserver,
    ) -> Result<Option<AssignmentDecision>> {
        if ev.seq != self.event_count {
            return Err(Error::OutOfOrder {
                expected: self.event_count,
                got: ev.seq,
            });
        }
        let decision = match &ev.kind {
            EventKind::AddVertex { vertex, neighbors } => {
                // Scale-out first; the fresh partition competes immediately.
                let total = self.summary.live_edge_count();
                let k = self.summary.partition_count();
                if self.cfg.elastic && scale::should_scale_out(total, k, &self.cfg.scaling) {
                    let p = self.summary.add_partition();
                    self.scaling_log.push(ScalingEvent {
                        seq: ev.seq,
                        action: ScalingAction::Add,
                        partition: p,
                        k_after: self.summary.partition_count(),
                        total_edges: total,
                    });
                    observer.on_partition_added(p)?;
                }
                let snap = self.gate_snapshot();
                let decision = match self.cfg.assigner {
                    Assigner::Streaming => assign::assign_vertex(
                        &self.summary,
                        *vertex,
                        neighbors,
                        &snap,
                        &mut self.rng,
                    )?,
                    Assigner::Hash => {
                        let p = crate::baselines::hash_assign(
                            *vertex,
                            self.summary.partition_count(),
                        );
                        AssignmentDecision {
                            partition: p,
                            reason: crate::assign::AssignReason::Baseline,
                            connectivity: assign::connectivity(&self.summary, p, neighbors),
                        }
                    }
                    Assigner::Ldg { vertex_capacity } => {
                        let p = crate::baselines::ldg_assign(
                            &self.summary,
                            *vertex,
                            neighbors,
                            vertex_capacity,
                        );
                        AssignmentDecision {
                            partition: p,
                            reason: crate::assign::AssignReason::Baseline,
                            connectivity: assign::connectivity(&self.summary, p, neighbors),
                        }
                    }
                };
                self.summary
                    .place_vertex(decision.partition, *vertex, neighbors)?;
                let mut arrived: Vec<VertexId> = neighbors
                    .iter()
                    .copied()
                    .filter(|u| u != vertex)
                    .collect();
                arrived.sort_unstable();
                arrived.dedup();
                self.edges_seen += arrived.len() as u64;
                if self.cfg.audit {
                    self.audit_log.push(AuditRow {
                        seq: ev.seq,
                        vertex: *vertex,
                        decision,
                        avg_d: snap.avg_d,
                        th: snap.th,
                    });
                }
                observer.on_placed(ev.seq, *vertex, neighbors, decision.partition)?;
                Some(decision)
            }
            EventKind::DeleteVertex { vertex } => {
                self.summary.delete_vertex(*vertex);
                observer.on_vertex_deleted(ev.seq, *vertex)?;
                None
            }
            EventKind::DeleteEdge { edge } => {
                self.summary.delete_edge(*edge);
                observer.on_edge_deleted(ev.seq, *edge)?;
                None
            }
        };
        self.event_count += 1;
        Ok(decision)
    }

    /// Drains underloaded partitions pairwise until no plan qualifies.
    pub fn consolidate(&mut self, observer: &mut dyn RunObserver) -> Result<usize> {
        if !self.cfg.elastic {
            return Ok(0);
        }
        let mut migrations = 0;
        while let Some(plan) = scale::plan_scale_in(&self.summary, &self.cfg.scaling) {
            observer.on_migration(&plan)?;
            scale::execute_migration(&mut self.summary, &plan)?;
            self.scaling_log.push(ScalingEvent {
                seq: self.event_count,
                action: ScalingAction::Retire,
                partition: plan.source,
                k_after: self.summary.partition_count(),
                total_edges: self.summary.live_edge_count(),
            });
            migrations += 1;
        }
        Ok(migrations)
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub series: Vec<MetricsRecord>,
    pub scaling_log: Vec<ScalingEvent>,
    pub audit_log: Vec<AuditRow>,
}

/// Runs a full ordered stream through a fresh engine.
///
/// At each interval boundary the engine consolidates underloaded partitions
/// and captures a metrics record. Returns the engine for inspection.
pub fn run_stream(
    events: &[GraphEvent],
    cfg: EngineConfig,
    interval_marks: &[u64],
    observer: &mut dyn RunObserver,
) -> Result<(Engine, RunOutput)> {
    let mut engine = Engine::new(cfg);
    run_into(&mut engine, events, interval_marks, observer)
        .map(|out| (engine, out))
}

/// Like [`run_stream`] but over a caller-constructed engine (fixed-k
/// baselines pre-create their partitions).
pub fn run_into(
    engine: &mut Engine,
    events: &[GraphEvent],
    interval_marks: &[u64],
    observer: &mut dyn RunObserver,
) -> Result<RunOutput> {
    let start = Instant::now();
    let mut series = Vec::new();
    let mut marks = interval_marks.iter().copied().peekable();
    let mut interval = 0usize;
    let at_mark = |engine: &mut Engine,
                       series: &mut Vec<MetricsRecord>,
                       interval: &mut usize,
                       observer: &mut dyn RunObserver|
     -> Result<()> {
        engine.consolidate(observer)?;
        series.push(metrics::capture(engine, *interval, start.elapsed()));
        *interval += 1;
        Ok(())
    };
    while marks.peek() == Some(&0) {
        marks.next();
        at_mark(engine, &mut series, &mut interval, observer)?;
    }
    for ev in events {
        engine.process_event_observed(ev, observer)?;
        observer.after_event(engine)?;
        while marks.peek() == Some(&engine.event_count()) {
            marks.next();
            at_mark(engine, &mut series, &mut interval, observer)?;
        }
    }
    // Final capture when a non-empty stream does not end exactly on a mark.
    if engine.event_count() > 0 && series.last().map(|r| r.seq) != Some(engine.event_count()) {
        series.push(metrics::capture(engine, interval, start.elapsed()));
    }
    Ok(RunOutput {
        series,
        scaling_log: engine.scaling_log.clone(),
        audit_log: engine.audit_log.clone(),
    })
}
