//! Authoritative partition summary: per-partition vertex sets, per-vertex
//! adjacency, and incrementally maintained load accounting.
//!
//! The summary is single-writer. A cut edge contributes 1 to the load of both
//! endpoint partitions; an internal edge contributes 1 to its partition.
//! Adjacency may reference vertices that have not arrived yet ("pending"
//! endpoints); those carry zero load until the neighbor is placed.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::Write;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::graph::{Edge, VertexId};
use crate::{Error, Result};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub struct PartitionId(pub u32);

impl fmt::Display for PartitionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Per-partition load accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PartitionStats {
    /// Edges with both endpoints in this partition.
    pub internal_edges: u64,
    /// Edges with exactly one endpoint in this partition.
    pub cut_edges: u64,
    pub vertex_count: u64,
}

impl PartitionStats {
    pub fn load(&self) -> u64 {
        self.internal_edges + self.cut_edges
    }
}

/// Capacity knobs shared by the scaler and the engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityConfig {
    /// MAXCAP: edge-load capacity of one partition.
    pub maxcap: u64,
    /// Percentage deriving the scale-in tolerance l.
    pub tolerance_parameter: f64,
    /// Percentage of capacity kept free at a migration destination.
    pub dest_param: f64,
}

impl CapacityConfig {
    pub fn new(maxcap: u64, tolerance_parameter: f64, dest_param: f64) -> Result<CapacityConfig> {
        if maxcap == 0 {
            return Err(Error::Config("maxcap must be > 0".into()));
        }
        for (name, v) in [
            ("tolerance_parameter", tolerance_parameter),
            ("dest_param", dest_param),
        ] {
            if !(0.0..=100.0).contains(&v) {
                return Err(Error::Config(format!("{name} must be in [0, 100], got {v}")));
            }
        }
        Ok(CapacityConfig {
            maxcap,
            tolerance_parameter,
            dest_param,
        })
    }
}

#[derive(Debug, Clone, Default)]
struct Partition {
    /// Vertex -> arriving edge list, in insertion order.
    adjacency: IndexMap<VertexId, HashSet<VertexId>>,
    stats: PartitionStats,
}

/// Master-side metadata: which vertex lives where, with its edge list.
#[derive(Debug, Clone, Default)]
pub struct PartitionSummary {
    partitions: BTreeMap<PartitionId, Partition>,
    placement: HashMap<VertexId, PartitionId>,
    /// x -> placed vertices whose adjacency lists x (x itself may be pending).
    listed_by: HashMap<VertexId, HashSet<VertexId>>,
    retired: BTreeSet<PartitionId>,
    next_id: u32,
    warn_count: u64,
    live_edges: u64,
    /// Adjacency references removed by deletions (half-edge units).
    deleted_half_edges: u64,
}

impl PartitionSummary {
    /// Empty summary with a single live partition 0.
    pub fn new() -> PartitionSummary {
        let mut s = PartitionSummary::default();
        s.add_partition();
        s
    }

    pub fn partition_count(&self) -> usize {
        self.partitions.len()
    }

    pub fn live_partitions(&self) -> impl Iterator<Item = PartitionId> + '_ {
        self.partitions.keys().copied()
    }

    pub fn is_live(&self, p: PartitionId) -> bool {
        self.partitions.contains_key(&p)
    }

    pub fn is_retired(&self, p: PartitionId) -> bool {
        self.retired.contains(&p)
    }

    pub fn placement_of(&self, v: VertexId) -> Option<PartitionId> {
        self.placement.get(&v).copied()
    }

    /// Every placed vertex with its owner (unordered).
    pub fn placements(&self) -> impl Iterator<Item = (VertexId, PartitionId)> + '_ {
        self.placement.iter().map(|(&v, &p)| (v, p))
    }

    pub fn live_vertex_count(&self) -> usize {
        self.placement.len()
    }

    pub fn live_edge_count(&self) -> u64 {
        self.live_edges
    }

    pub fn deleted_half_edges(&self) -> u64 {
        self.deleted_half_edges
    }

    pub fn warn_count(&self) -> u64 {
        self.warn_count
    }

    pub fn stats_of(&self, p: PartitionId) -> Option<PartitionStats> {
        self.partitions.get(&p).map(|part| part.stats)
    }

    /// Incrementally maintained stats of every live partition.
    pub fn stats(&self) -> BTreeMap<PartitionId, PartitionStats> {
        self.partitions
            .iter()
            .map(|(&p, part)| (p, part.stats))
            .collect()
    }

    /// Sum over partitions of cut_edges (each cut edge counted twice).
    pub fn total_cut_half_edges(&self) -> u64 {
        self.partitions.values().map(|p| p.stats.cut_edges).sum()
    }

    /// Number of distinct cut edges.
    pub fn cut_edge_count(&self) -> u64 {
        self.total_cut_half_edges() / 2
    }

    /// Vertices of `p` in insertion order.
    pub fn vertices_of(&self, p: PartitionId) -> impl Iterator<Item = VertexId> + '_ {
        self.partitions
            .get(&p)
            .into_iter()
            .flat_map(|part| part.adjacency.keys().copied())
    }

    pub fn adjacency_of(&self, v: VertexId) -> Option<&HashSet<VertexId>> {
        let p = self.placement.get(&v)?;
        self.partitions[p].adjacency.get(&v)
    }

    /// Number of adjacency references currently stored (half-edge units).
    pub fn stored_half_edges(&self) -> u64 {
        self.partitions
            .values()
            .flat_map(|p| p.adjacency.values())
            .map(|n| n.len() as u64)
            .sum()
    }

    /// A fresh live partition; retired ids are never reused.
    pub fn add_partition(&mut self) -> PartitionId {
        let id = PartitionId(self.next_id);
        self.next_id += 1;
        self.partitions.insert(id, Partition::default());
        id
    }

    /// Placed partners of `v` given its arriving edge list: neighbors already
    /// placed plus placed vertices that listed `v` while it was pending.
    fn placed_partners(&self, v: VertexId, neighbors: &HashSet<VertexId>) -> HashSet<VertexId> {
        let mut partners: HashSet<VertexId> = neighbors
            .iter()
            .copied()
            .filter(|u| self.placement.contains_key(u))
            .collect();
        if let Some(listers) = self.listed_by.get(&v) {
            partners.extend(listers.iter().copied());
        }
        partners
    }

    /// Places `v` into `p` with its arriving edge list.
    ///
    /// Each new live edge increments internal_edges of `p` (co-located
    /// partner) or cut_edges of both endpoint partitions.
    pub fn place_vertex(
        &mut self,
        p: PartitionId,
        v: VertexId,
        neighbors: &[VertexId],
    ) -> Result<()> {
        if self.placement.contains_key(&v) {
            return Err(Error::DuplicatePlacement(v));
        }
        if !self.partitions.contains_key(&p) {
            return Err(Error::InvalidPartition(p));
        }
        let nbrs: HashSet<VertexId> = neighbors.iter().copied().filter(|&u| u != v).collect();
        let partners = self.placed_partners(v, &nbrs);
        for u in &partners {
            let q = self.placement[u];
            if q == p {
                self.partitions.get_mut(&p).unwrap().stats.internal_edges += 1;
            } else {
                self.partitions.get_mut(&p).unwrap().stats.cut_edges += 1;
                self.partitions.get_mut(&q).unwrap().stats.cut_edges += 1;
            }
            self.live_edges += 1;
        }
        for &u in &nbrs {
            self.listed_by.entry(u).or_default().insert(v);
        }
        let part = self.partitions.get_mut(&p).unwrap();
        part.adjacency.insert(v, nbrs);
        part.stats.vertex_count += 1;
        self.placement.insert(v, p);
        Ok(())
    }

    fn dec_edge(&mut self, p: PartitionId, q: PartitionId) {
        if p == q {
            self.partitions.get_mut(&p).unwrap().stats.internal_edges -= 1;
        } else {
            self.partitions.get_mut(&p).unwrap().stats.cut_edges -= 1;
            self.partitions.get_mut(&q).unwrap().stats.cut_edges -= 1;
        }
        self.live_edges -= 1;
    }

    /// Removes `v` and every adjacency reference to it. Unknown vertices are
    /// a warning no-op (the stream may delete vertices that never arrived).
    pub fn delete_vertex(&mut self, v: VertexId) {
        let Some(p) = self.placement.get(&v).copied() else {
            self.warn_count += 1;
            return;
        };
        let nbrs = self.partitions[&p].adjacency[&v].clone();
        let partners = self.placed_partners(v, &nbrs);
        for &u in &partners {
            let q = self.placement[&u];
            self.dec_edge(p, q);
        }
        // Drop v's own references.
        for &u in &nbrs {
            if let Some(set) = self.listed_by.get_mut(&u) {
                set.remove(&v);
                if set.is_empty() {
                    self.listed_by.remove(&u);
                }
            }
        }
        self.deleted_half_edges += nbrs.len() as u64;
        // Scrub v from every adjacency list that mentions it.
        if let Some(listers) = self.listed_by.remove(&v) {
            for w in listers {
                let q = self.placement[&w];
                let adj = self.partitions.get_mut(&q).unwrap().adjacency.get_mut(&w).unwrap();
                if adj.remove(&v) {
                    self.deleted_half_edges += 1;
                }
            }
        }
        let part = self.partitions.get_mut(&p).unwrap();
        part.adjacency.shift_remove(&v);
        part.stats.vertex_count -= 1;
        self.placement.remove(&v);
    }

    /// Removes `e` from both endpoints' adjacency lists wherever present.
    /// An edge listed by neither endpoint is a warning no-op.
    pub fn delete_edge(&mut self, e: Edge) {
        let (a, b) = (e.src, e.dst);
        let mut removed = 0u64;
        let mut was_live = false;
        for (x, y) in [(a, b), (b, a)] {
            if let Some(px) = self.placement.get(&x).copied() {
                let adj = self
                    .partitions
                    .get_mut(&px)
                    .unwrap()
                    .adjacency
                    .get_mut(&x)
                    .unwrap();
                if adj.remove(&y) {
                    removed += 1;
                    was_live |= self.placement.contains_key(&y);
                    if let Some(set) = self.listed_by.get_mut(&y) {
                        set.remove(&x);
                        if set.is_empty() {
                            self.listed_by.remove(&y);
                        }
                    }
                }
            }
        }
        if removed == 0 {
            self.warn_count += 1;
            return;
        }
        self.deleted_half_edges += removed;
        if was_live {
            let (pa, pb) = (self.placement[&a], self.placement[&b]);
            self.dec_edge(pa, pb);
        }
    }

    /// Full-scan ground truth for the incremental stats; the brute-force
    /// oracle used by tests and by migration validation.
    pub fn recompute_stats(&self) -> BTreeMap<PartitionId, PartitionStats> {
        let mut out: BTreeMap<PartitionId, PartitionStats> = self
            .partitions
            .iter()
            .map(|(&p, part)| {
                (
                    p,
                    PartitionStats {
                        vertex_count: part.adjacency.len() as u64,
                        ..Default::default()
                    },
                )
            })
            .collect();
        let mut seen: HashSet<(VertexId, VertexId)> = HashSet::new();
        for part in self.partitions.values() {
            for (&v, nbrs) in &part.adjacency {
                for &u in nbrs {
                    if !self.placement.contains_key(&u) {
                        continue;
                    }
                    let key = if v < u { (v, u) } else { (u, v) };
                    if !seen.insert(key) {
                        continue;
                    }
                    let (pv, pu) = (self.placement[&v], self.placement[&u]);
                    if pv == pu {
                        out.get_mut(&pv).unwrap().internal_edges += 1;
                    } else {
                        out.get_mut(&pv).unwrap().cut_edges += 1;
                        out.get_mut(&pu).unwrap().cut_edges += 1;
                    }
                }
            }
        }
        out
    }

    /// Moves every vertex of `source` (with adjacency) into `dest`, adjusting
    /// stats incrementally, then retires `source`.
    pub(crate) fn merge_partition_into(&mut self, source: PartitionId, dest: PartitionId) -> Result<()> {
        if !self.partitions.contains_key(&source) {
            return Err(Error::InvalidPartition(source));
        }
        if !self.partitions.contains_key(&dest) || source == dest {
            return Err(Error::InvalidPartition(dest));
        }
        let moved = std::mem::take(&mut self.partitions.get_mut(&source).unwrap().adjacency);
        let moving: HashSet<VertexId> = moved.keys().copied().collect();
        for (&v, nbrs) in &moved {
            let partners = self.placed_partners(v, nbrs);
            for u in partners {
                if moving.contains(&u) {
                    // Internal to the migrated set: count once per edge.
                    if u < v {
                        continue;
                    }
                    // Stays internal; was internal at source, now at dest.
                    let s = self.partitions.get_mut(&source).unwrap();
                    s.stats.internal_edges -= 1;
                    let d = self.partitions.get_mut(&dest).unwrap();
                    d.stats.internal_edges += 1;
                } else {
                    let q = self.placement[&u];
                    if q == dest {
                        // Cut (source, dest) becomes internal at dest.
                        self.partitions.get_mut(&source).unwrap().stats.cut_edges -= 1;
                        let d = self.partitions.get_mut(&dest).unwrap();
                        d.stats.cut_edges -= 1;
                        d.stats.internal_edges += 1;
                    } else {
                        // Cut to a third partition: moves from source to dest.
                        self.partitions.get_mut(&source).unwrap().stats.cut_edges -= 1;
                        self.partitions.get_mut(&dest).unwrap().stats.cut_edges += 1;
                    }
                }
            }
        }
        let count = moved.len() as u64;
        for (v, nbrs) in moved {
            self.placement.insert(v, dest);
            self.partitions.get_mut(&dest).unwrap().adjacency.insert(v, nbrs);
        }
        {
            let d = self.partitions.get_mut(&dest).unwrap();
            d.stats.vertex_count += count;
        }
        let leftover = self.partitions.remove(&source).unwrap();
        debug_assert_eq!(leftover.stats.internal_edges, 0);
        debug_assert_eq!(leftover.stats.cut_edges, 0);
        self.retired.insert(source);
        Ok(())
    }

    /// Newline-delimited "vertex_id,partition_id" records, sorted by vertex.
    pub fn export_placements(&self, mut w: impl Write) -> Result<()> {
        let mut rows: Vec<(VertexId, PartitionId)> =
            self.placement.iter().map(|(&v, &p)| (v, p)).collect();
        rows.sort_unstable();
        for (v, p) in rows {
            writeln!(w, "{},{}", v.0, p.0)?;
        }
        Ok(())
    }

    /// Checks structural invariants; used by tests and debug assertions.
    pub fn check_invariants(&self) -> Result<()> {
        let recomputed = self.recompute_stats();
        if recomputed != self.stats() {
            return Err(Error::StalePlan(format!(
                "incremental stats drifted: {:?} vs recomputed {:?}",
                self.stats(),
                recomputed
            )));
        }
        for (&p, part) in &self.partitions {
            for &v in part.adjacency.keys() {
                if self.placement.get(&v) != Some(&p) {
                    return Err(Error::StalePlan(format!(
                        "placement inverse violated for {v} in {p}"
                    )));
                }
            }
        }
        let total: usize = self.partitions.values().map(|p| p.adjacency.len()).sum();
        if total != self.placement.len() {
            return Err(Error::StalePlan("vertex counted in two partitions".into()));
        }
        if !self.total_cut_half_edges().is_multiple_of(2) {
            return Err(Error::StalePlan("odd cut half-edge total".into()));
        }
        Ok(())
    }
}
