//! Graph identifiers, stream events, and dataset ingestion.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dense vertex identifier, 0..n-1 within one run.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub struct VertexId(pub u64);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Undirected edge, normalized so that `src < dst`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub src: VertexId,
    pub dst: VertexId,
}

impl Edge {
    /// Returns `None` for self-loops.
    pub fn new(a: VertexId, b: VertexId) -> Option<Edge> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Some(Edge { src: a, dst: b }),
            std::cmp::Ordering::Greater => Some(Edge { src: b, dst: a }),
            std::cmp::Ordering::Equal => None,
        }
    }
}

/// One element of the mutation stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    /// Vertex arrives together with its full edge list.
    AddVertex {
        vertex: VertexId,
        neighbors: Vec<VertexId>,
    },
    DeleteVertex { vertex: VertexId },
    DeleteEdge { edge: Edge },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphEvent {
    pub seq: u64,
    pub kind: EventKind,
}

impl GraphEvent {
    pub fn add(seq: u64, vertex: VertexId, neighbors: Vec<VertexId>) -> GraphEvent {
        GraphEvent {
            seq,
            kind: EventKind::AddVertex { vertex, neighbors },
        }
    }

    pub fn delete_vertex(seq: u64, vertex: VertexId) -> GraphEvent {
        GraphEvent {
            seq,
            kind: EventKind::DeleteVertex { vertex },
        }
    }

    pub fn delete_edge(seq: u64, edge: Edge) -> GraphEvent {
        GraphEvent {
            seq,
            kind: EventKind::DeleteEdge { edge },
        }
    }
}

/// A normalized undirected graph loaded from disk.
///
/// Vertex ids are remapped to a dense 0..n-1 space in first-appearance order;
/// the original ids are kept in `original_ids` for reporting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub name: String,
    /// adjacency[v] is the sorted neighbor list of dense vertex v.
    pub adjacency: Vec<Vec<VertexId>>,
    /// original_ids[v] is the id vertex v carried in the source file.
    pub original_ids: Vec<u64>,
}

impl Dataset {
    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(|n| n.len()).sum::<usize>() / 2
    }

    pub fn from_edges(name: &str, edges: &[(u64, u64)]) -> Dataset {
        let mut remap: HashMap<u64, VertexId> = HashMap::new();
        let mut original_ids = Vec::new();
        let mut intern = |id: u64, original_ids: &mut Vec<u64>| -> VertexId {
            *remap.entry(id).or_insert_with(|| {
                original_ids.push(id);
                VertexId(original_ids.len() as u64 - 1)
            })
        };
        let mut pairs: Vec<(VertexId, VertexId)> = Vec::new();
        for &(a, b) in edges {
            if a == b {
                continue; // self-loop
            }
            let u = intern(a, &mut original_ids);
            let v = intern(b, &mut original_ids);
            if let Some(e) = Edge::new(u, v) {
                pairs.push((e.src, e.dst));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        let mut adjacency = vec![Vec::new(); original_ids.len()];
        for (u, v) in pairs {
            adjacency[u.0 as usize].push(v);
            adjacency[v.0 as usize].push(u);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        Dataset {
            name: name.to_string(),
            adjacency,
            original_ids,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeListFormat {
    /// Whitespace-separated "u v" lines; '#' starts a comment line.
    Snap,
    /// Header "n m [fmt]"; line i lists the (1-indexed) neighbors of vertex i.
    Chaco,
}

impl std::str::FromStr for EdgeListFormat {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "snap" => Ok(EdgeListFormat::Snap),
            "chaco" => Ok(EdgeListFormat::Chaco),
            other => Err(format!("unknown format {other:?} (expected snap|chaco)")),
        }
    }
}

/// Parses an on-disk edge list into a normalized undirected [`Dataset`].
///
/// Directed inputs are symmetrized, duplicate edges collapsed, and self-loops
/// dropped.
pub fn parse_edge_list(path: &Path, format: EdgeListFormat) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    match format {
        EdgeListFormat::Snap => parse_snap(path, reader, &name),
        EdgeListFormat::Chaco => parse_chaco(path, reader, &name),
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn parse_snap(path: &Path, reader: impl BufRead, name: &str) -> Result<Dataset> {
    let mut edges: Vec<(u64, u64)> = Vec::new();
    let mut saw_data = false;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        saw_data = true;
        let mut it = trimmed.split_whitespace();
        let u = it
            .next()
            .ok_or_else(|| parse_err(path, idx + 1, "missing source vertex"))?;
        let v = it
            .next()
            .ok_or_else(|| parse_err(path, idx + 1, "missing destination vertex"))?;
        if it.next().is_some() {
            return Err(parse_err(path, idx + 1, "expected exactly two fields"));
        }
        let u: u64 = u
            .parse()
            .map_err(|e| parse_err(path, idx + 1, format!("bad vertex id {u:?}: {e}")))?;
        let v: u64 = v
            .parse()
            .map_err(|e| parse_err(path, idx + 1, format!("bad vertex id {v:?}: {e}")))?;
        edges.push((u, v));
    }
    if !saw_data {
        return Err(Error::EmptyFile(path.display().to_string()));
    }
    Ok(Dataset::from_edges(name, &edges))
}

fn parse_chaco(path: &Path, reader: impl BufRead, name: &str) -> Result<Dataset> {
    let mut lines = reader.lines().enumerate();
    let (hidx, header) = loop {
        match lines.next() {
            Some((idx, line)) => {
                let line = line?;
                let t = line.trim().to_string();
                if t.is_empty() || t.starts_with('%') {
                    continue;
                }
                break (idx, t);
            }
            None => return Err(Error::EmptyFile(path.display().to_string())),
        }
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() < 2 {
        return Err(parse_err(path, hidx + 1, "header must be \"n m [fmt]\""));
    }
    let n: u64 = fields[0]
        .parse()
        .map_err(|e| parse_err(path, hidx + 1, format!("bad vertex count: {e}")))?;
    if fields.len() > 2 && fields[2] != "0" && fields[2] != "00" && fields[2] != "000" {
        return Err(parse_err(
            path,
            hidx + 1,
            format!("weighted graphs unsupported (fmt {})", fields[2]),
        ));
    }
    let mut edges: Vec<(u64, u64)> = Vec::new();
    let mut vertex = 0u64;
    for (idx, line) in lines {
        let line = line?;
        let t = line.trim();
        if t.starts_with('%') {
            continue;
        }
        vertex += 1;
        if vertex > n {
            return Err(parse_err(path, idx + 1, "more vertex lines than header n"));
        }
        for tok in t.split_whitespace() {
            let nbr: u64 = tok
                .parse()
                .map_err(|e| parse_err(path, idx + 1, format!("bad neighbor {tok:?}: {e}")))?;
            if nbr == 0 || nbr > n {
                return Err(parse_err(path, idx + 1, format!("neighbor {nbr} out of range 1..={n}")));
            }
            // chaco is 1-indexed
            edges.push((vertex - 1, nbr - 1));
        }
    }
    if vertex < n {
        return Err(parse_err(
            path,
            vertex as usize + 1,
            format!("expected {n} vertex lines, found {vertex}"),
        ));
    }
    // Chaco ids are already dense; keep the identity mapping (this also
    // preserves isolated vertices, which carry no edge line content).
    Ok(dense_identity(name, n, &edges))
}

fn dense_identity(name: &str, n: u64, edges: &[(u64, u64)]) -> Dataset {
    let mut adjacency = vec![Vec::new(); n as usize];
    let mut pairs: Vec<(u64, u64)> = edges
        .iter()
        .filter(|(a, b)| a != b)
        .map(|&(a, b)| if a < b { (a, b) } else { (b, a) })
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    for (a, b) in pairs {
        adjacency[a as usize].push(VertexId(b));
        adjacency[b as usize].push(VertexId(a));
    }
    for nbrs in &mut adjacency {
        nbrs.sort_unstable();
    }
    Dataset {
        name: name.to_string(),
        adjacency,
        original_ids: (0..n).collect(),
    }
}

/// Writes a dataset back out in snap format (one "u v" line per edge).
pub fn write_snap(d: &Dataset, mut w: impl Write) -> Result<()> {
    writeln!(w, "# {}  |V|={} |E|={}", d.name, d.vertex_count(), d.edge_count())?;
    for (v, nbrs) in d.adjacency.iter().enumerate() {
        for n in nbrs {
            if (v as u64) < n.0 {
                writeln!(w, "{}\t{}", d.original_ids[v], d.original_ids[n.0 as usize])?;
            }
        }
    }
    Ok(())
}

/// Expected dataset characteristics, loaded from a small `key = value` file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub name: String,
    pub vertices: usize,
    pub edges: usize,
}

pub fn parse_manifest(path: &Path) -> Result<DatasetManifest> {
    let file = std::fs::File::open(path)?;
    let mut name = None;
    let mut vertices = None;
    let mut edges = None;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let (k, v) = t
            .split_once('=')
            .ok_or_else(|| parse_err(path, idx + 1, "expected key = value"))?;
        let (k, v) = (k.trim(), v.trim());
        match k {
            "name" => name = Some(v.to_string()),
            "vertices" => {
                vertices = Some(v.parse().map_err(|e| {
                    parse_err(path, idx + 1, format!("bad vertex count: {e}"))
                })?)
            }
            "edges" => {
                edges = Some(v.parse().map_err(|e| {
                    parse_err(path, idx + 1, format!("bad edge count: {e}"))
                })?)
            }
            other => return Err(parse_err(path, idx + 1, format!("unknown key {other:?}"))),
        }
    }
    Ok(DatasetManifest {
        name: name.unwrap_or_default(),
        vertices: vertices
            .ok_or_else(|| Error::ManifestMismatch("manifest missing vertices".into()))?,
        edges: edges.ok_or_else(|| Error::ManifestMismatch("manifest missing edges".into()))?,
    })
}

pub fn validate_against_manifest(d: &Dataset, m: &DatasetManifest) -> Result<()> {
    if d.vertex_count() != m.vertices || d.edge_count() != m.edges {
        return Err(Error::ManifestMismatch(format!(
            "{}: parsed |V|={} |E|={}, manifest says |V|={} |E|={}",
            d.name,
            d.vertex_count(),
            d.edge_count(),
            m.vertices,
            m.edges
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamOrder {
    FileOrder,
    Shuffled { seed: u64 },
}

/// Permutation of 0..n derived from `order`.
pub fn vertex_order(n: usize, order: StreamOrder) -> Vec<VertexId> {
    let mut ids: Vec<VertexId> = (0..n as u64).map(VertexId).collect();
    if let StreamOrder::Shuffled { seed } = order {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        ids.shuffle(&mut rng);
    }
    ids
}

/// One AddVertex event per vertex, each carrying its full adjacency.
///
/// Edges may reference vertices not yet streamed; the consumer resolves those
/// pending endpoints when the neighbor arrives.
pub fn dataset_to_add_events(d: &Dataset, order: StreamOrder) -> Vec<GraphEvent> {
    vertex_order(d.vertex_count(), order)
        .into_iter()
        .enumerate()
        .map(|(seq, v)| GraphEvent::add(seq as u64, v, d.adjacency[v.0 as usize].clone()))
        .collect()
}
