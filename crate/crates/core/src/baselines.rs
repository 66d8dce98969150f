//! Comparator assigners: uniform hash placement and an LDG-style greedy.
//! Both run the same event and metrics path as the main assigner; only the
//! decision function differs, and neither scales the partition set.

use crate::assign::connectivity;
use crate::graph::VertexId;
use crate::state::{PartitionId, PartitionSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Hash,
    Ldg,
}

/// FNV-1a over the vertex id's little-endian bytes, modulo k.
pub fn hash_assign(v: VertexId, k: usize) -> PartitionId {
    const OFFSET: u64 = 0xcbf29ce484222325;
    const PRIME: u64 = 0x100000001b3;
    let mut h = OFFSET;
    for b in v.0.to_le_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(PRIME);
    }
    PartitionId((h % k as u64) as u32)
}

/// Greedy with a linear capacity penalty: argmax of
/// connectivity * (1 - vertex_count / cap). Ties break to the partition
/// with fewest vertices, then lowest id, so a saturated partition never
/// beats an emptier one at equal score.
pub fn ldg_assign(
    s: &PartitionSummary,
    _v: VertexId,
    neighbors: &[VertexId],
    cap: u64,
) -> PartitionId {
    let stats = s.stats();
    let mut best: Option<(f64, u64, PartitionId)> = None;
    for (&p, st) in &stats {
        let conn = connectivity(s, p, neighbors) as f64;
        let penalty = 1.0 - st.vertex_count as f64 / cap as f64;
        let score = conn * penalty;
        let candidate = (score, st.vertex_count, p);
        best = Some(match best {
            None => candidate,
            Some(cur) => {
                if score > cur.0 || (score == cur.0 && st.vertex_count < cur.1) {
                    candidate
                } else {
                    cur
                }
            }
        });
    }
    best.map(|(_, _, p)| p).unwrap_or(PartitionId(0))
}
