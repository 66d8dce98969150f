//! Master/worker transport: the engine's placement decisions drive real
//! inter-process placement over stream sockets.
//!
//! Framing (see PROTOCOL.md): 4-byte big-endian length, 1-byte protocol
//! version, 1-byte message kind, fixed-field payload. Every master-to-worker
//! message carries a seq; the worker acknowledges by echoing it. Delivery is
//! at-least-once with idempotent apply keyed by seq.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::thread::JoinHandle;
use std::time::Duration;

use crate::engine::{Engine, EngineConfig, RunObserver, RunOutput};
use crate::graph::{Edge, GraphEvent, VertexId};
use crate::scale::MigrationPlan;
use crate::state::PartitionId;
use crate::{Error, Result};

pub const PROTOCOL_VERSION: u8 = 1;
pub const ACK_TIMEOUT: Duration = Duration::from_secs(2);
pub const MAX_RETRIES: u32 = 3;
const MAX_FRAME: u32 = 64 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WireMessage {
    Hello {
        partition: PartitionId,
    },
    PlaceVertex {
        seq: u64,
        vertex: VertexId,
        neighbors: Vec<VertexId>,
    },
    DeleteVertex {
        seq: u64,
        vertex: VertexId,
    },
    DeleteEdge {
        seq: u64,
        edge: Edge,
    },
    MigrateBatch {
        seq: u64,
        vertices: Vec<(VertexId, Vec<VertexId>)>,
    },
    Ack {
        seq: u64,
    },
    Shutdown {
        seq: u64,
        drop_shard: bool,
    },
}

impl WireMessage {
    fn kind_byte(&self) -> u8 {
        match self {
            WireMessage::Hello { .. } => 0,
            WireMessage::PlaceVertex { .. } => 1,
            WireMessage::DeleteVertex { .. } => 2,
            WireMessage::DeleteEdge { .. } => 3,
            WireMessage::MigrateBatch { .. } => 4,
            WireMessage::Ack { .. } => 5,
            WireMessage::Shutdown { .. } => 6,
        }
    }

    pub fn seq(&self) -> Option<u64> {
        match self {
            WireMessage::Hello { .. } => None,
            WireMessage::PlaceVertex { seq, .. }
            | WireMessage::DeleteVertex { seq, .. }
            | WireMessage::DeleteEdge { seq, .. }
            | WireMessage::MigrateBatch { seq, .. }
            | WireMessage::Ack { seq }
            | WireMessage::Shutdown { seq, .. } => Some(*seq),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut payload = Vec::new();
        match self {
            WireMessage::Hello { partition } => {
                payload.extend_from_slice(&partition.0.to_be_bytes());
            }
            WireMessage::PlaceVertex {
                seq,
                vertex,
                neighbors,
            } => {
                payload.extend_from_slice(&seq.to_be_bytes());
                payload.extend_from_slice(&vertex.0.to_be_bytes());
                payload.extend_from_slice(&(neighbors.len() as u32).to_be_bytes());
                for n in neighbors {
                    payload.extend_from_slice(&n.0.to_be_bytes());
                }
            }
            WireMessage::DeleteVertex { seq, vertex } => {
                payload.extend_from_slice(&seq.to_be_bytes());
                payload.extend_from_slice(&vertex.0.to_be_bytes());
            }
            WireMessage::DeleteEdge { seq, edge } => {
                payload.extend_from_slice(&seq.to_be_bytes());
                payload.extend_from_slice(&edge.src.0.to_be_bytes());
                payload.extend_from_slice(&edge.dst.0.to_be_bytes());
            }
            WireMessage::MigrateBatch { seq, vertices } => {
                payload.extend_from_slice(&seq.to_be_bytes());
                payload.extend_from_slice(&(vertices.len() as u32).to_be_bytes());
                for (v, nbrs) in vertices {
                    payload.extend_from_slice(&v.0.to_be_bytes());
                    payload.extend_from_slice(&(nbrs.len() as u32).to_be_bytes());
                    for n in nbrs {
                        payload.extend_from_slice(&n.0.to_be_bytes());
                    }
                }
            }
            WireMessage::Ack { seq } => {
                payload.extend_from_slice(&seq.to_be_bytes());
            }
            WireMessage::Shutdown { seq, drop_shard } => {
                payload.extend_from_slice(&seq.to_be_bytes());
                payload.push(*drop_shard as u8);
            }
        }
        let mut frame = Vec::with_capacity(payload.len() + 6);
        frame.extend_from_slice(&(payload.len() as u32 + 2).to_be_bytes());
        frame.push(PROTOCOL_VERSION);
        frame.push(self.kind_byte());
        frame.extend_from_slice(&payload);
        frame
    }

    pub fn decode(version: u8, kind: u8, payload: &[u8]) -> Result<WireMessage> {
        if version != PROTOCOL_VERSION {
            return Err(Error::Transport(format!(
                "protocol version {version} (expected {PROTOCOL_VERSION})"
            )));
        }
        let mut cur = Cursor { buf: payload, at: 0 };
        let msg = match kind {
            0 => WireMessage::Hello {
                partition: PartitionId(cur.u32()?),
            },
            1 => {
                let seq = cur.u64()?;
                let vertex = VertexId(cur.u64()?);
                let n = cur.u32()? as usize;
                let mut neighbors = Vec::with_capacity(n);
                for _ in 0..n {
                    neighbors.push(VertexId(cur.u64()?));
                }
                WireMessage::PlaceVertex {
                    seq,
                    vertex,
                    neighbors,
                }
            }
            2 => WireMessage::DeleteVertex {
                seq: cur.u64()?,
                vertex: VertexId(cur.u64()?),
            },
            3 => {
                let seq = cur.u64()?;
                let a = VertexId(cur.u64()?);
                let b = VertexId(cur.u64()?);
                let edge = Edge::new(a, b)
                    .ok_or_else(|| Error::Transport("self-loop edge on the wire".into()))?;
                WireMessage::DeleteEdge { seq, edge }
            }
            4 => {
                let seq = cur.u64()?;
                let count = cur.u32()? as usize;
                let mut vertices = Vec::with_capacity(count);
                for _ in 0..count {
                    let v = VertexId(cur.u64()?);
                    let n = cur.u32()? as usize;
                    let mut nbrs = Vec::with_capacity(n);
                    for _ in 0..n {
                        nbrs.push(VertexId(cur.u64()?));
                    }
                    vertices.push((v, nbrs));
                }
                WireMessage::MigrateBatch { seq, vertices }
            }
            5 => WireMessage::Ack { seq: cur.u64()? },
            6 => WireMessage::Shutdown {
                seq: cur.u64()?,
                drop_shard: cur.u8()? != 0,
            },
            other => return Err(Error::Transport(format!("unknown message kind {other}"))),
        };
        if cur.at != payload.len() {
            return Err(Error::Transport(format!(
                "trailing bytes in kind-{kind} payload"
            )));
        }
        Ok(msg)
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    at: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.at + n > self.buf.len() {
            return Err(Error::Transport("truncated payload".into()));
        }
        let s = &self.buf[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn write_frame(stream: &mut impl Write, msg: &WireMessage) -> Result<()> {
    stream.write_all(&msg.encode())?;
    stream.flush()?;
    Ok(())
}

pub fn read_frame(stream: &mut impl Read) -> Result<WireMessage> {
    let mut len = [0u8; 4];
    stream.read_exact(&mut len)?;
    let len = u32::from_be_bytes(len);
    if !(2..=MAX_FRAME).contains(&len) {
        return Err(Error::Transport(format!("bad frame length {len}")));
    }
    let mut body = vec![0u8; len as usize];
    stream.read_exact(&mut body)?;
    WireMessage::decode(body[0], body[1], &body[2..])
}

/// A worker's shard at shutdown.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkerReport {
    pub partition: PartitionId,
    pub shard: BTreeMap<VertexId, Vec<VertexId>>,
    /// Messages whose seq had already been applied (redeliveries).
    pub duplicates_ignored: u64,
}

/// Single-threaded applier: serves one master connection, applying each
/// message to the local shard and acknowledging with the same seq.
/// Redelivered seqs are ignored but still acknowledged.
pub fn serve_worker(listener: TcpListener, partition: PartitionId) -> Result<WorkerReport> {
    let (mut stream, _) = listener.accept()?;
    write_frame(&mut stream, &WireMessage::Hello { partition })?;
    let mut shard: BTreeMap<VertexId, Vec<VertexId>> = BTreeMap::new();
    let mut applied: HashSet<u64> = HashSet::new();
    let mut duplicates = 0u64;
    loop {
        let msg = read_frame(&mut stream)?;
        let seq = msg
            .seq()
            .ok_or_else(|| Error::Transport("worker received message without seq".into()))?;
        let fresh = applied.insert(seq);
        if !fresh {
            duplicates += 1;
        }
        let mut done = None;
        if fresh {
            match &msg {
                WireMessage::PlaceVertex {
                    vertex, neighbors, ..
                } => {
                    shard.insert(*vertex, neighbors.clone());
                }
                WireMessage::DeleteVertex { vertex, .. } => {
                    shard.remove(vertex);
                    for nbrs in shard.values_mut() {
                        nbrs.retain(|n| n != vertex);
                    }
                }
                WireMessage::DeleteEdge { edge, .. } => {
                    for (a, b) in [(edge.src, edge.dst), (edge.dst, edge.src)] {
                        if let Some(nbrs) = shard.get_mut(&a) {
                            nbrs.retain(|n| *n != b);
                        }
                    }
                }
                WireMessage::MigrateBatch { vertices, .. } => {
                    for (v, nbrs) in vertices {
                        shard.insert(*v, nbrs.clone());
                    }
                }
                WireMessage::Shutdown { drop_shard, .. } => {
                    if *drop_shard {
                        shard.clear();
                    }
                    done = Some(());
                }
                WireMessage::Hello { .. } | WireMessage::Ack { .. } => {
                    return Err(Error::Transport("unexpected message at worker".into()));
                }
            }
        } else if matches!(msg, WireMessage::Shutdown { .. }) {
            done = Some(());
        }
        write_frame(&mut stream, &WireMessage::Ack { seq })?;
        if done.is_some() {
            return Ok(WorkerReport {
                partition,
                shard,
                duplicates_ignored: duplicates,
            });
        }
    }
}

pub struct WorkerHandle {
    pub addr: SocketAddr,
    pub partition: PartitionId,
    join: JoinHandle<Result<WorkerReport>>,
}

/// Binds an ephemeral local port and runs the worker on its own thread.
pub fn spawn_worker(partition: PartitionId) -> Result<WorkerHandle> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    let join = std::thread::spawn(move || serve_worker(listener, partition));
    Ok(WorkerHandle {
        addr,
        partition,
        join,
    })
}

impl WorkerHandle {
    pub fn join(self) -> Result<WorkerReport> {
        self.join
            .join()
            .map_err(|_| Error::Transport("worker thread panicked".into()))?
    }
}

/// Master-side connection to one worker.
pub struct WorkerLink {
    stream: TcpStream,
    pub partition: PartitionId,
}

impl WorkerLink {
    pub fn connect(addr: SocketAddr) -> Result<WorkerLink> {
        let mut stream = TcpStream::connect(addr)?;
        stream.set_read_timeout(Some(ACK_TIMEOUT))?;
        stream.set_nodelay(true)?;
        let partition = match read_frame(&mut stream)? {
            WireMessage::Hello { partition } => partition,
            other => {
                return Err(Error::Transport(format!(
                    "expected Hello, got kind {}",
                    other.kind_byte()
                )))
            }
        };
        Ok(WorkerLink { stream, partition })
    }

    /// At-least-once send: retries the same seq until the matching Ack
    /// arrives, then fails marking the worker suspect.
    pub fn send_with_ack(&mut self, msg: &WireMessage) -> Result<()> {
        let seq = msg.seq().expect("master messages carry a seq");
        for _ in 0..MAX_RETRIES {
            write_frame(&mut self.stream, msg)?;
            match read_frame(&mut self.stream) {
                Ok(WireMessage::Ack { seq: echoed }) if echoed == seq => return Ok(()),
                Ok(WireMessage::Ack { .. }) => continue, // stale ack from a retry
                Ok(other) => {
                    return Err(Error::Transport(format!(
                        "expected Ack, got kind {}",
                        other.kind_byte()
                    )))
                }
                Err(Error::Io(e))
                    if e.kind() == std::io::ErrorKind::WouldBlock
                        || e.kind() == std::io::ErrorKind::TimedOut =>
                {
                    continue
                }
                Err(e) => return Err(e),
            }
        }
        Err(Error::AckTimeout(self.partition.0, seq))
    }
}

/// One worker per live partition; master metadata is updated only after the
/// owning worker acknowledges.
#[derive(Default)]
pub struct WorkerRegistry {
    links: BTreeMap<PartitionId, WorkerLink>,
    handles: BTreeMap<PartitionId, WorkerHandle>,
}

impl WorkerRegistry {
    pub fn register(&mut self, handle: WorkerHandle) -> Result<()> {
        let link = WorkerLink::connect(handle.addr)?;
        if link.partition != handle.partition {
            return Err(Error::Transport("worker announced a different partition".into()));
        }
        self.links.insert(handle.partition, link);
        self.handles.insert(handle.partition, handle);
        Ok(())
    }

    pub fn spawn_and_register(&mut self, partition: PartitionId) -> Result<()> {
        self.register(spawn_worker(partition)?)
    }

    pub fn link(&mut self, p: PartitionId) -> Result<&mut WorkerLink> {
        self.links
            .get_mut(&p)
            .ok_or_else(|| Error::Transport(format!("no worker for partition {p}")))
    }

    /// Shuts the worker down (optionally dropping its shard) and collects
    /// its report.
    pub fn retire(&mut self, p: PartitionId, seq: u64, drop_shard: bool) -> Result<WorkerReport> {
        let mut link = self
            .links
            .remove(&p)
            .ok_or_else(|| Error::Transport(format!("no worker for partition {p}")))?;
        link.send_with_ack(&WireMessage::Shutdown {
            seq,
            drop_shard,
        })?;
        let handle = self.handles.remove(&p).unwrap();
        handle.join()
    }

    pub fn partitions(&self) -> Vec<PartitionId> {
        self.links.keys().copied().collect()
    }
}

/// Drives placements, deletions, and migrations out to workers as the
/// engine makes them, keeping a neighbor-list mirror for migration batches.
pub struct DistributedObserver {
    registry: WorkerRegistry,
    mirror: HashMap<VertexId, Vec<VertexId>>,
    /// Wire seqs are allocated independently of event seqs so retries and
    /// migrations stay unique.
    next_wire_seq: u64,
    pub reports: Vec<WorkerReport>,
}

impl DistributedObserver {
    /// Spawns `workers` local workers for partitions 0..workers.
    pub fn with_workers(workers: usize) -> Result<DistributedObserver> {
        let mut registry = WorkerRegistry::default();
        for p in 0..workers {
            registry.spawn_and_register(PartitionId(p as u32))?;
        }
        Ok(DistributedObserver {
            registry,
            mirror: HashMap::new(),
            next_wire_seq: 0,
            reports: Vec::new(),
        })
    }

    fn wire_seq(&mut self) -> u64 {
        let s = self.next_wire_seq;
        self.next_wire_seq += 1;
        s
    }

    /// Shuts down every remaining worker and collects shard reports.
    pub fn finish(mut self) -> Result<Vec<WorkerReport>> {
        for p in self.registry.partitions() {
            let seq = self.wire_seq();
            let report = self.registry.retire(p, seq, false)?;
            self.reports.push(report);
        }
        Ok(self.reports)
    }
}

impl RunObserver for DistributedObserver {
    fn on_placed(
        &mut self,
        _seq: u64,
        vertex: VertexId,
        neighbors: &[VertexId],
        partition: PartitionId,
    ) -> Result<()> {
        let seq = self.wire_seq();
        self.registry.link(partition)?.send_with_ack(&WireMessage::PlaceVertex {
            seq,
            vertex,
            neighbors: neighbors.to_vec(),
        })?;
        self.mirror.insert(vertex, neighbors.to_vec());
        Ok(())
    }

    fn on_vertex_deleted(&mut self, _seq: u64, vertex: VertexId) -> Result<()> {
        self.mirror.remove(&vertex);
        for nbrs in self.mirror.values_mut() {
            nbrs.retain(|n| *n != vertex);
        }
        // Every worker may hold references to the vertex.
        for p in self.registry.partitions() {
            let seq = self.wire_seq();
            self.registry
                .link(p)?
                .send_with_ack(&WireMessage::DeleteVertex { seq, vertex })?;
        }
        Ok(())
    }

    fn on_edge_deleted(&mut self, _seq: u64, edge: Edge) -> Result<()> {
        for (a, b) in [(edge.src, edge.dst), (edge.dst, edge.src)] {
            if let Some(nbrs) = self.mirror.get_mut(&a) {
                nbrs.retain(|n| *n != b);
            }
        }
        for p in self.registry.partitions() {
            let seq = self.wire_seq();
            self.registry
                .link(p)?
                .send_with_ack(&WireMessage::DeleteEdge { seq, edge })?;
        }
        Ok(())
    }

    fn on_partition_added(&mut self, partition: PartitionId) -> Result<()> {
        self.registry.spawn_and_register(partition)
    }

    /// Batch to the destination, Ack, then drop-and-shutdown the source;
    /// the master's own metadata changes only after both acknowledge.
    fn on_migration(&mut self, plan: &MigrationPlan) -> Result<()> {
        let vertices: Vec<(VertexId, Vec<VertexId>)> = plan
            .vertices
            .iter()
            .map(|&v| (v, self.mirror.get(&v).cloned().unwrap_or_default()))
            .collect();
        let seq = self.wire_seq();
        self.registry
            .link(plan.destination)?
            .send_with_ack(&WireMessage::MigrateBatch { seq, vertices })?;
        let seq = self.wire_seq();
        let report = self.registry.retire(plan.source, seq, true)?;
        self.reports.push(report);
        Ok(())
    }
}

/// Full distributed run: `initial_workers` fixed-size start, dynamic worker
/// spawn on scale-out, shard reports collected at shutdown.
pub fn run_distributed(
    events: &[GraphEvent],
    cfg: EngineConfig,
    interval_marks: &[u64],
    initial_workers: usize,
) -> Result<(Engine, RunOutput, Vec<WorkerReport>)> {
    let mut observer = DistributedObserver::with_workers(initial_workers.max(1))?;
    let mut engine = Engine::with_fixed_partitions(cfg, initial_workers.max(1));
    let out = crate::engine::run_into(&mut engine, events, interval_marks, &mut observer)?;
    let reports = observer.finish()?;
    Ok((engine, out, reports))
}
