use serde::{Deserialize, Serialize};

use super::config::QoeParams;
use crate::cloud_services::{CacheAccess, FeedbackRecord, OffloadDecision, OffloadTask};
use crate::patient_and_expert_models::AdvanceSignal;
use crate::protocol::{
    EmergencyAlert, ExpertRecommendation, Message, ResourcePlan, ResourceVector, RiskAssessment,
    RiskLevel, SensorKind, SessionRecord, TherapyCommand, TherapyStage,
};
use crate::sim_kernel::{Payload, SimTime};

pub const CLOUD: &str = "cloud";
pub const EXPERT: &str = "expert";
pub const GATEWAY: &str = "gateway";

pub fn robot_node(patient_id: &str) -> String {
    format!("robot:{patient_id}")
}

/// Everything that can happen in a run. Serialized as `{kind, payload}` in the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Event {
    Sample { patient_id: String, sensor: SensorKind },
    SessionStart { patient_id: String },
    Beat { patient_id: String },
    WindowEnd { patient_id: String },
    EpochEnd {},
    ExpertWake { patient_id: String },
    /// A recommendation entering the expert's outbox, scripted or from the API.
    Submit { recommendation: ExpertRecommendation },
    Deliver(Delivery),
    Notify(Notice),
}

impl Payload for Event {
    fn kind(&self) -> &'static str {
        match self {
            Event::Sample { .. } => "sample",
            Event::SessionStart { .. } => "session_start",
            Event::Beat { .. } => "beat",
            Event::WindowEnd { .. } => "window_end",
            Event::EpochEnd { .. } => "epoch_end",
            Event::ExpertWake { .. } => "expert_wake",
            Event::Submit { .. } => "submit",
            Event::Deliver(_) => "deliver",
            Event::Notify(_) => "notify",
        }
    }

    fn payload_value(&self) -> serde_json::Value {
        match crate::canonical::to_value(self) {
            serde_json::Value::Object(mut m) => m.remove("payload").unwrap_or(serde_json::Value::Null),
            other => other,
        }
    }
}

impl Event {
    /// Rebuild an event from the `kind` and `payload` fields of a trace line.
    pub fn from_trace(kind: &str, payload: serde_json::Value) -> Result<Event, serde_json::Error> {
        serde_json::from_value(serde_json::json!({ "kind": kind, "payload": payload }))
    }
}

/// A message in flight over a link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delivery {
    pub from: String,
    pub sent_at: SimTime,
    pub size: u64,
    /// Seq of the `Submit` event a forwarded recommendation came from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ref_seq: Option<u64>,
    pub body: Carried,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Carried {
    Message(Message),
    Signal(AdvanceSignal),
}

impl Carried {
    pub fn wire_size(&self) -> u64 {
        match self {
            Carried::Message(m) => m.wire_size(),
            Carried::Signal(s) => crate::canonical::to_vec(s).len() as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub patient_id: String,
    pub robot_id: String,
    pub stage: TherapyStage,
    pub tree_id: String,
    pub demand: ResourceVector,
}

/// Observable state changes, addressed to the gateway with zero delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "notice", rename_all = "snake_case")]
pub enum Notice {
    RunStarted {
        seed: u64,
        duration_ms: u64,
        qoe: QoeParams,
        patients: Vec<RosterEntry>,
    },
    RunFinished {
        events: u64,
    },
    Handover {
        patient_id: String,
        node_id: String,
        cost_ms: u64,
    },
    RiskChanged {
        previous: RiskLevel,
        assessment: RiskAssessment,
    },
    AlertRaised {
        alert: EmergencyAlert,
    },
    AlertCleared {
        patient_id: String,
        alert_id: String,
    },
    SessionStarted {
        patient_id: String,
        session_id: String,
        tree_id: String,
        stage: TherapyStage,
    },
    SessionClosed {
        record: SessionRecord,
    },
    StageChanged {
        patient_id: String,
        from: TherapyStage,
        to: TherapyStage,
        tree_id: String,
    },
    RecommendationApplied {
        recommendation: ExpertRecommendation,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        command: Option<TherapyCommand>,
    },
    RecommendationRejected {
        recommendation: ExpertRecommendation,
        reason: String,
    },
    Plan {
        plan: ResourcePlan,
    },
    Feedback {
        record: FeedbackRecord,
    },
    Offload {
        patient_id: String,
        task: OffloadTask,
        decision: OffloadDecision,
    },
    CacheAccess {
        patient_id: String,
        asset_id: String,
        access: CacheAccess,
    },
}

impl Notice {
    pub fn name(&self) -> &'static str {
        match self {
            Notice::RunStarted { .. } => "run_started",
            Notice::RunFinished { .. } => "run_finished",
            Notice::Handover { .. } => "handover",
            Notice::RiskChanged { .. } => "risk_changed",
            Notice::AlertRaised { .. } => "alert_raised",
            Notice::AlertCleared { .. } => "alert_cleared",
            Notice::SessionStarted { .. } => "session_started",
            Notice::SessionClosed { .. } => "session_closed",
            Notice::StageChanged { .. } => "stage_changed",
            Notice::RecommendationApplied { .. } => "recommendation_applied",
            Notice::RecommendationRejected { .. } => "recommendation_rejected",
            Notice::Plan { .. } => "plan",
            Notice::Feedback { .. } => "feedback",
            Notice::Offload { .. } => "offload",
            Notice::CacheAccess { .. } => "cache_access",
        }
    }
}
