//! The two cloud servers: cognitive data (ingest, risk, alerts, routing) and
//! resource management (allocation, offload, handover, caching).

mod allocation;
mod cache;
mod placement;
mod risk;
mod server;

use thiserror::Error;

use crate::protocol::Violation;

pub use allocation::{allocate, allocate_resource};
pub use cache::{CacheAccess, CacheOutcome, LruCache};
pub use placement::{handover, offload_costs, offload_decision, EdgeCandidate, OffloadDecision, OffloadTask, Placement};
pub use risk::{RiskPolicy, RiskRule};
pub use server::{
    utilization, CognitiveDataServer, FeedbackRecord, PatientDossier, ResourceManager, RiskUpdate, Routed,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CloudError {
    #[error("unknown patient {0}")]
    UnknownPatient(String),
    #[error("alert {0} is not outstanding")]
    StaleAck(String),
    #[error("invalid recommendation: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("asset {asset_id} of {size} bytes exceeds cache capacity {capacity}")]
    AssetTooLarge { asset_id: String, size: u64, capacity: u64 },
    #[error("no handover candidates for {0}")]
    NoCandidates(String),
}
