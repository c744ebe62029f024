use serde::{Deserialize, Serialize};

use super::CloudError;
use crate::sim_kernel::LinkModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffloadTask {
    pub task_id: String,
    /// Abstract compute units.
    pub cycles: u64,
    pub input_bytes: u64,
    pub origin: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Placement {
    Local,
    Cloud,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffloadDecision {
    pub placement: Placement,
    pub local_ms: f64,
    pub cloud_ms: f64,
}

/// Predicted completion times; capacities are in compute units per millisecond.
pub fn offload_costs(task: &OffloadTask, edge_capacity: f64, cloud_capacity: f64, uplink: &LinkModel) -> (f64, f64) {
    let local = task.cycles as f64 / edge_capacity;
    let cloud = task.cycles as f64 / cloud_capacity + uplink.delivery_delay(task.input_bytes) as f64;
    (local, cloud)
}

/// Run where the task finishes strictly sooner; ties stay local.
pub fn offload_decision(task: &OffloadTask, edge_capacity: f64, cloud_capacity: f64, uplink: &LinkModel) -> OffloadDecision {
    let (local_ms, cloud_ms) = offload_costs(task, edge_capacity, cloud_capacity, uplink);
    OffloadDecision {
        placement: if cloud_ms < local_ms { Placement::Cloud } else { Placement::Local },
        local_ms,
        cloud_ms,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeCandidate {
    pub node_id: String,
    pub latency_ms: u64,
    #[serde(default)]
    pub queue_length: u64,
}

impl EdgeCandidate {
    pub fn cost(&self, load_penalty_ms: u64) -> u64 {
        self.latency_ms + load_penalty_ms * self.queue_length
    }
}

/// Cheapest candidate by latency plus queueing penalty; ties go to the lowest id.
pub fn handover<'a>(
    robot: &str,
    candidates: &'a [EdgeCandidate],
    load_penalty_ms: u64,
) -> Result<&'a EdgeCandidate, CloudError> {
    candidates
        .iter()
        .min_by(|a, b| {
            a.cost(load_penalty_ms)
                .cmp(&b.cost(load_penalty_ms))
                .then_with(|| a.node_id.cmp(&b.node_id))
        })
        .ok_or_else(|| CloudError::NoCandidates(robot.to_string()))
}
