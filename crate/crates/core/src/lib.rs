//! Streaming dynamic graph partitioner.
//!
//! An event-driven engine that places vertices of a mutating graph onto a
//! dynamic set of partitions in one pass, balancing edge-cut against load,
//! scaling the partition set out when every partition saturates and back in
//! by migrating vertices off underloaded partitions.

pub mod assign;
pub mod baselines;
pub mod engine;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod net;
pub mod runner;
pub mod scale;
pub mod state;
pub mod stream;
pub mod synthetic;

pub use assign::{AssignReason, AssignmentDecision, BalanceSnapshot};
pub use engine::{Engine, EngineConfig, GateDirection, RunOutput};
pub use error::Error;
pub use graph::{Dataset, Edge, GraphEvent, StreamOrder, VertexId};
pub use scale::{MigrationPlan, ScalingConfig};
pub use state::{CapacityConfig, PartitionId, PartitionStats, PartitionSummary};
pub use stream::{Schedule, ScenarioConfig};

pub type Result<T> = std::result::Result<T, Error>;
