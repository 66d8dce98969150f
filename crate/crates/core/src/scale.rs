//! Elastic partition lifecycle: scale-out when every partition saturates,
//! scale-in by draining an underloaded partition into a qualifying peer.

use std::collections::BTreeMap;

use crate::graph::VertexId;
use crate::state::{CapacityConfig, PartitionId, PartitionStats, PartitionSummary};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingConfig {
    pub maxcap: u64,
    /// l = tolerance_parameter * maxcap / 100: loads below this are
    /// candidates for consolidation.
    pub low_load_threshold: f64,
    /// destination_threshold = maxcap - dest_param * maxcap / 100.
    pub destination_threshold: f64,
}

impl ScalingConfig {
    pub fn from_capacity(cap: &CapacityConfig) -> Result<ScalingConfig> {
        let maxcap = cap.maxcap as f64;
        let low = cap.tolerance_parameter * maxcap / 100.0;
        let headroom = cap.dest_param * maxcap / 100.0;
        let dest = maxcap - headroom;
        if low >= dest {
            return Err(Error::Config(format!(
                "tolerance threshold l={low} must be below destination_threshold={dest}"
            )));
        }
        Ok(ScalingConfig {
            maxcap: cap.maxcap,
            low_load_threshold: low,
            destination_threshold: dest,
        })
    }
}

/// True when the per-partition average edge count has reached capacity
/// (maxcap <= total_edges / k, evaluated in real arithmetic).
pub fn should_scale_out(total_edges: u64, k: usize, cfg: &ScalingConfig) -> bool {
    debug_assert!(k >= 1);
    cfg.maxcap as f64 <= total_edges as f64 / k as f64
}

/// A planned drain of one whole partition into another.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MigrationPlan {
    pub source: PartitionId,
    pub destination: PartitionId,
    /// Entire vertex set of the source, in insertion order.
    pub vertices: Vec<VertexId>,
    /// source load + destination load at planning time (upper bound on the
    /// destination's post-migration load).
    pub projected_dest_load: u64,
}

/// Plans a scale-in when at least two partitions sit below the tolerance
/// threshold: the minimum-load partition drains into the largest-load
/// qualifying peer that can absorb it under `destination_threshold`.
pub fn plan_scale_in(s: &PartitionSummary, cfg: &ScalingConfig) -> Option<MigrationPlan> {
    let stats = s.stats();
    if stats.len() < 2 {
        return None;
    }
    let low: Vec<(PartitionId, u64)> = stats
        .iter()
        .filter(|(_, st)| (st.load() as f64) < cfg.low_load_threshold)
        .map(|(&p, st)| (p, st.load()))
        .collect();
    if low.len() < 2 {
        return None;
    }
    let &(source, src_load) = low.iter().min_by_key(|&&(p, l)| (l, p)).unwrap();
    // Largest-load peer that still fits; ties break to the lowest id.
    let dest = low
        .iter()
        .filter(|&&(p, _)| p != source)
        .filter(|&&(_, l)| (l + src_load) as f64 <= cfg.destination_threshold)
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))?;
    Some(MigrationPlan {
        source,
        destination: dest.0,
        vertices: s.vertices_of(source).collect(),
        projected_dest_load: dest.1 + src_load,
    })
}

fn current_projection(
    stats: &BTreeMap<PartitionId, PartitionStats>,
    plan: &MigrationPlan,
) -> Option<u64> {
    Some(stats.get(&plan.source)?.load() + stats.get(&plan.destination)?.load())
}

/// Executes a migration plan: moves every source vertex (with adjacency) to
/// the destination, rebalances stats exactly, retires the source.
///
/// Fails if loads drifted since planning; the caller re-plans.
pub fn execute_migration(s: &mut PartitionSummary, plan: &MigrationPlan) -> Result<()> {
    let stats = s.stats();
    match current_projection(&stats, plan) {
        Some(proj) if proj == plan.projected_dest_load => {}
        Some(proj) => {
            return Err(Error::StalePlan(format!(
                "projected destination load {} but current is {proj}",
                plan.projected_dest_load
            )))
        }
        None => {
            return Err(Error::StalePlan(format!(
                "partition {} or {} no longer live",
                plan.source, plan.destination
            )))
        }
    }
    let current: Vec<VertexId> = s.vertices_of(plan.source).collect();
    if current != plan.vertices {
        return Err(Error::StalePlan("source vertex set changed".into()));
    }
    s.merge_partition_into(plan.source, plan.destination)
}
