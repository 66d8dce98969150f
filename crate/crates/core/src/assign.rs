//! Placement decisions: connectivity argmax, minimum-load fallback, and the
//! communication-aware balancing gate.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::VertexId;
use crate::state::{PartitionId, PartitionStats, PartitionSummary};
use crate::{Error, Result};

/// The balancing quantities evaluated at one event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceSnapshot {
    /// (highest load - lowest load) / k.
    pub avg_d: f64,
    /// Population standard deviation of partition loads.
    pub load_dev: f64,
    /// (edges_seen / cuts_seen) * load_dev; +inf while no edge is cut.
    pub w_dev: f64,
    /// w_dev - load_dev.
    pub th: f64,
    pub edges_seen: u64,
    pub cuts_seen: u64,
    /// True when the balancing branch takes over (avg_d > th).
    pub intervene: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssignReason {
    MaxConnectivity,
    TieMinLoad,
    Random,
    BalanceMinLoad,
    /// Produced by a comparison strategy, not the gate pipeline.
    Baseline,
}

impl AssignReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            AssignReason::MaxConnectivity => "max-connectivity",
            AssignReason::TieMinLoad => "tie-min-load",
            AssignReason::Random => "random",
            AssignReason::BalanceMinLoad => "balance-min-load",
            AssignReason::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentDecision {
    pub partition: PartitionId,
    pub reason: AssignReason,
    /// |E(v) ∩ P| at the chosen partition.
    pub connectivity: u64,
}

/// Number of `neighbors` already placed in `p`.
pub fn connectivity(s: &PartitionSummary, p: PartitionId, neighbors: &[VertexId]) -> u64 {
    neighbors
        .iter()
        .filter(|&&u| s.placement_of(u) == Some(p))
        .count() as u64
}

/// The live partition with the smallest load; ties break to the lowest id.
pub fn find_minimum_load(stats: &BTreeMap<PartitionId, PartitionStats>) -> Result<PartitionId> {
    stats
        .iter()
        .min_by_key(|(p, st)| (st.load(), **p))
        .map(|(&p, _)| p)
        .ok_or(Error::NoPartitions)
}

/// Evaluates the balancing quantities over the current loads.
pub fn balance_snapshot(
    stats: &BTreeMap<PartitionId, PartitionStats>,
    edges_seen: u64,
    cuts_seen: u64,
) -> BalanceSnapshot {
    let loads: Vec<f64> = stats.values().map(|st| st.load() as f64).collect();
    let k = loads.len() as f64;
    let mean = loads.iter().sum::<f64>() / k;
    let load_dev = (loads.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / k).sqrt();
    let hi = loads.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = loads.iter().cloned().fold(f64::INFINITY, f64::min);
    let avg_d = (hi - lo) / k;
    let w_dev = if cuts_seen > 0 {
        (edges_seen as f64 / cuts_seen as f64) * load_dev
    } else {
        // No cut edges: communication cost is already optimal, never intervene.
        f64::INFINITY
    };
    let th = w_dev - load_dev;
    BalanceSnapshot {
        avg_d,
        load_dev,
        w_dev,
        th,
        edges_seen,
        cuts_seen,
        intervene: avg_d > th,
    }
}

/// Decides the partition for `v` without mutating the summary.
///
/// When the gate intervenes, the minimum-load partition wins outright.
/// Otherwise the connectivity argmax applies, with ties resolved by minimum
/// load and the zero-connectivity case by one uniform draw from `rng`.
pub fn assign_vertex(
    s: &PartitionSummary,
    v: VertexId,
    neighbors: &[VertexId],
    snap: &BalanceSnapshot,
    rng: &mut impl Rng,
) -> Result<AssignmentDecision> {
    if s.placement_of(v).is_some() {
        return Err(Error::DuplicatePlacement(v));
    }
    let stats = s.stats();
    if stats.is_empty() {
        return Err(Error::NoPartitions);
    }
    if snap.intervene {
        let p = find_minimum_load(&stats)?;
        return Ok(AssignmentDecision {
            partition: p,
            reason: AssignReason::BalanceMinLoad,
            connectivity: connectivity(s, p, neighbors),
        });
    }
    let conn: BTreeMap<PartitionId, u64> = stats
        .keys()
        .map(|&p| (p, connectivity(s, p, neighbors)))
        .collect();
    let best = *conn.values().max().unwrap();
    if best == 0 {
        let live: Vec<PartitionId> = stats.keys().copied().collect();
        let p = live[rng.gen_range(0..live.len())];
        return Ok(AssignmentDecision {
            partition: p,
            reason: AssignReason::Random,
            connectivity: 0,
        });
    }
    let tied: Vec<PartitionId> = conn
        .iter()
        .filter(|(_, &c)| c == best)
        .map(|(&p, _)| p)
        .collect();
    if tied.len() == 1 {
        return Ok(AssignmentDecision {
            partition: tied[0],
            reason: AssignReason::MaxConnectivity,
            connectivity: best,
        });
    }
    let tied_stats: BTreeMap<PartitionId, PartitionStats> =
        tied.iter().map(|&p| (p, stats[&p])).collect();
    Ok(AssignmentDecision {
        partition: find_minimum_load(&tied_stats)?,
        reason: AssignReason::TieMinLoad,
        connectivity: best,
    })
}
