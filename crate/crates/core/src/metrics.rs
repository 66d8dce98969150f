//! Edge-cut ratio, load imbalance, and CSV reporting.

use std::io::Write;
use std::time::Duration;

use crate::engine::Engine;
use crate::Result;

/// One captured evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub seq: u64,
    pub interval: usize,
    pub edge_cut_ratio: f64,
    pub load_imbalance: f64,
    pub partition_count: usize,
    pub live_vertices: usize,
    pub live_edges: u64,
    pub elapsed: Duration,
}

/// Cut edges over live edges; 0 for an empty graph.
pub fn edge_cut_ratio(engine: &Engine) -> f64 {
    let live = engine.summary().live_edge_count();
    if live == 0 {
        return 0.0;
    }
    engine.summary().cut_edge_count() as f64 / live as f64
}

/// Population standard deviation of per-partition loads.
pub fn load_imbalance(engine: &Engine) -> f64 {
    let loads: Vec<f64> = engine
        .summary()
        .stats()
        .values()
        .map(|st| st.load() as f64)
        .collect();
    let n = loads.len() as f64;
    let mean = loads.iter().sum::<f64>() / n;
    (loads.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n).sqrt()
}

pub fn capture(engine: &Engine, interval: usize, elapsed: Duration) -> MetricsRecord {
    MetricsRecord {
        seq: engine.event_count(),
        interval,
        edge_cut_ratio: edge_cut_ratio(engine),
        load_imbalance: load_imbalance(engine),
        partition_count: engine.summary().partition_count(),
        live_vertices: engine.summary().live_vertex_count(),
        live_edges: engine.summary().live_edge_count(),
        elapsed,
    }
}

pub const CSV_HEADER: &str =
    "seq,interval,edge_cut_ratio,load_imbalance,partitions,live_vertices,live_edges,elapsed_ms";

pub fn write_csv(series: &[MetricsRecord], mut w: impl Write) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in series {
        writeln!(
            w,
            "{},{},{:.9},{:.9},{},{},{},{}",
            r.seq,
            r.interval,
            r.edge_cut_ratio,
            r.load_imbalance,
            r.partition_count,
            r.live_vertices,
            r.live_edges,
            r.elapsed.as_millis()
        )?;
    }
    Ok(())
}
