//! Deterministic synthetic graph generators used by tests, benchmarks, and
//! desk-scale experiment runs where the original dataset files are not
//! at hand: a triangulated mesh (finite-element flavor), a community graph
//! (collaboration-network flavor), and a two-clique balance probe.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::Dataset;

/// Triangulated rows x cols grid: rook edges plus one diagonal per cell,
/// then extra second diagonals (in seeded order) until exactly
/// `target_edges`. Panics if the target is out of reach.
pub fn mesh(name: &str, rows: usize, cols: usize, target_edges: usize, seed: u64) -> Dataset {
    let id = |r: usize, c: usize| (r * cols + c) as u64;
    let mut edges: Vec<(u64, u64)> = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.push((id(r, c), id(r, c + 1)));
            }
            if r + 1 < rows {
                edges.push((id(r, c), id(r + 1, c)));
            }
            if r + 1 < rows && c + 1 < cols {
                edges.push((id(r, c), id(r + 1, c + 1)));
            }
        }
    }
    assert!(
        edges.len() <= target_edges,
        "base mesh already has {} edges (> {target_edges})",
        edges.len()
    );
    let mut extra: Vec<(u64, u64)> = Vec::new();
    for r in 0..rows.saturating_sub(1) {
        for c in 1..cols {
            extra.push((id(r, c), id(r + 1, c - 1)));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    extra.shuffle(&mut rng);
    let need = target_edges - edges.len();
    assert!(need <= extra.len(), "cannot reach {target_edges} edges");
    edges.extend(extra.into_iter().take(need));
    let d = Dataset::from_edges(name, &edges);
    assert_eq!(d.vertex_count(), rows * cols);
    assert_eq!(d.edge_count(), target_edges);
    d
}

/// Community-structured graph: `vertices` split into `groups` blocks, a
/// random spanning tree plus random intra-block edges, and a budgeted rest
/// of inter-block edges, totalling exactly `target_edges`.
pub fn community(
    name: &str,
    vertices: usize,
    target_edges: usize,
    groups: usize,
    inter_fraction: f64,
    seed: u64,
) -> Dataset {
    assert!(groups >= 1 && vertices >= groups);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let block_of = |v: usize| v * groups / vertices;
    let mut edges: Vec<(u64, u64)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let push = |a: usize, b: usize, edges: &mut Vec<(u64, u64)>,
                    seen: &mut std::collections::HashSet<(usize, usize)>|
     -> bool {
        if a == b {
            return false;
        }
        let key = (a.min(b), a.max(b));
        if seen.insert(key) {
            edges.push((a as u64, b as u64));
            true
        } else {
            false
        }
    };
    // Chain within each block keeps every vertex non-isolated.
    for v in 1..vertices {
        if block_of(v) == block_of(v - 1) {
            push(v - 1, v, &mut edges, &mut seen);
        }
    }
    // Bridge consecutive blocks so the graph is connected.
    for g in 1..groups {
        let a = (g - 1) * vertices / groups;
        let b = g * vertices / groups;
        push(a, b, &mut edges, &mut seen);
    }
    let inter_budget = (target_edges as f64 * inter_fraction) as usize;
    let mut guard = 0usize;
    while edges.len() < target_edges {
        guard += 1;
        assert!(guard < target_edges * 100, "edge budget unreachable");
        let a = rng.gen_range(0..vertices);
        let want_inter = edges.len() % target_edges.max(1) < inter_budget
            && rng.gen_bool(inter_fraction);
        let b = if want_inter {
            rng.gen_range(0..vertices)
        } else {
            // Same block as a.
            let g = block_of(a);
            let lo = g * vertices / groups;
            let hi = (g + 1) * vertices / groups;
            rng.gen_range(lo..hi)
        };
        push(a, b, &mut edges, &mut seen);
    }
    let d = Dataset::from_edges(name, &edges);
    assert_eq!(d.vertex_count(), vertices);
    assert_eq!(d.edge_count(), target_edges);
    d
}

/// Two `n`-vertex cliques joined by `bridges` edges; the balance probe.
pub fn two_cliques(n: usize, bridges: usize) -> Dataset {
    assert!(bridges <= n);
    let mut edges: Vec<(u64, u64)> = Vec::new();
    for off in [0usize, n] {
        for i in 0..n {
            for j in (i + 1)..n {
                edges.push(((off + i) as u64, (off + j) as u64));
            }
        }
    }
    for b in 0..bridges {
        edges.push((b as u64, (n + b) as u64));
    }
    Dataset::from_edges("two-cliques", &edges)
}

/// Stand-in for a ~4200-vertex, 13722-edge finite-element mesh.
pub fn mesh_4200() -> Dataset {
    mesh("3elt", 60, 70, 13722, 42)
}

/// Stand-in for a ~5242-vertex, 14496-edge collaboration network.
pub fn collab_5242() -> Dataset {
    community("grqc", 5242, 14496, 40, 0.08, 42)
}
