use crate::graph::VertexId;
use crate::state::PartitionId;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("empty input file: {0}")]
    EmptyFile(String),
    #[error("dataset does not match manifest: {0}")]
    ManifestMismatch(String),
    #[error("vertex {0:?} is already placed")]
    DuplicatePlacement(VertexId),
    #[error("partition {0:?} is not live")]
    InvalidPartition(PartitionId),
    #[error("no live partitions")]
    NoPartitions,
    #[error("event out of order: expected seq {expected}, got {got}")]
    OutOfOrder { expected: u64, got: u64 },
    #[error("migration plan is stale: {0}")]
    StalePlan(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("schedule error: {0}")]
    Schedule(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("worker {0} did not acknowledge seq {1}")]
    AckTimeout(u32, u64),
    #[error("sink error at seq {seq}: {msg}")]
    Sink { seq: u64, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
