use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Modality, SensorKind, TherapyStage};
use crate::sim_kernel::SimTime;

/// One timestamped reading from a worn or ambient sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorFrame {
    pub sensor_id: String,
    pub patient_id: String,
    pub kind: SensorKind,
    pub t: SimTime,
    pub value: f64,
    pub seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PatientResponse {
    Laugh,
    VerbalReply,
    NoResponse,
    Withdrawal,
}

impl PatientResponse {
    pub const ALL: [PatientResponse; 4] = [
        PatientResponse::Laugh,
        PatientResponse::VerbalReply,
        PatientResponse::NoResponse,
        PatientResponse::Withdrawal,
    ];

    pub fn is_positive(self) -> bool {
        matches!(self, PatientResponse::Laugh | PatientResponse::VerbalReply)
    }
}

/// A robot action together with the patient's reaction to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionEvent {
    pub t: SimTime,
    pub session_id: String,
    pub action: String,
    pub patient_response: PatientResponse,
    pub modality: Modality,
}

/// `[t0, t1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub t0: SimTime,
    pub t1: SimTime,
}

impl Window {
    pub fn new(t0: SimTime, t1: SimTime) -> Self {
        Window { t0, t1 }
    }

    pub fn contains(&self, t: SimTime) -> bool {
        t >= self.t0 && t < self.t1
    }

    pub fn len_ms(&self) -> u64 {
        self.t1.since(self.t0)
    }
}

/// Running statistics of one signal inside a window. Empty summaries carry no
/// mean, min or max.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatSummary {
    pub mean: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub count: u64,
}

impl StatSummary {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return StatSummary::default();
        }
        let sum: f64 = values.iter().sum();
        StatSummary {
            mean: Some(sum / values.len() as f64),
            min: values.iter().copied().reduce(f64::min),
            max: values.iter().copied().reduce(f64::max),
            count: values.len() as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkInfo {
    pub network_type: String,
    pub service_data_flow_bytes: u64,
    pub communication_quality: f64,
}

/// Windowed fusion of vitals, ambient readings, interactions and link telemetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusedRecord {
    pub patient_id: String,
    pub robot_id: String,
    pub window: Window,
    pub vitals: BTreeMap<SensorKind, StatSummary>,
    pub ambient: BTreeMap<SensorKind, StatSummary>,
    pub interactions: Vec<InteractionEvent>,
    pub network_info: NetworkInfo,
}

impl FusedRecord {
    pub fn summary(&self, kind: SensorKind) -> Option<&StatSummary> {
        if kind.is_medical() {
            self.vitals.get(&kind)
        } else {
            self.ambient.get(&kind)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RiskLevel {
    Low,
    Moderate,
    High,
    Critical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Statistic {
    Min,
    Max,
    Mean,
}

/// Which side of a threshold counts as a violation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// Violated when the value is strictly below the threshold.
    Below,
    /// Violated when the value is strictly above the threshold.
    Above,
}

impl Direction {
    pub fn violated(self, value: f64, threshold: f64) -> bool {
        match self {
            Direction::Below => value < threshold,
            Direction::Above => value > threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskFactor {
    pub kind: SensorKind,
    pub statistic: Statistic,
    pub observed: f64,
    pub bound: f64,
    pub direction: Direction,
    pub points: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskAssessment {
    pub patient_id: String,
    pub level: RiskLevel,
    pub score: u32,
    pub factors: Vec<RiskFactor>,
    /// Alert ids forcing the level to Critical.
    pub active_alerts: Vec<String>,
    pub t: SimTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlertCause {
    pub kind: SensorKind,
    pub value: f64,
    pub threshold: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmergencyAlert {
    pub alert_id: String,
    pub patient_id: String,
    pub cause: AlertCause,
    pub created_at: SimTime,
    pub priority: RiskLevel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum Recommendation {
    PrescriptionUpdate { text: String },
    TherapyStageChange { target: TherapyStage },
    Instruction { text: String },
    EmergencyAck { alert_id: String },
}

impl Recommendation {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Recommendation::PrescriptionUpdate { .. } => "PrescriptionUpdate",
            Recommendation::TherapyStageChange { .. } => "TherapyStageChange",
            Recommendation::Instruction { .. } => "Instruction",
            Recommendation::EmergencyAck { .. } => "EmergencyAck",
        }
    }
}

/// A steering message from a human or scripted expert.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertRecommendation {
    pub expert_id: String,
    pub patient_id: String,
    pub issued_at: SimTime,
    #[serde(flatten)]
    pub recommendation: Recommendation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TherapyCommand {
    pub patient_id: String,
    pub stage: TherapyStage,
    pub tree_id: String,
    #[serde(default)]
    pub session_params: BTreeMap<String, String>,
}

impl TherapyCommand {
    pub fn new(patient_id: impl Into<String>, stage: TherapyStage, tree_id: impl Into<String>) -> Self {
        TherapyCommand {
            patient_id: patient_id.into(),
            stage,
            tree_id: tree_id.into(),
            session_params: BTreeMap::new(),
        }
    }

    pub fn default_for(patient_id: impl Into<String>, stage: TherapyStage) -> Self {
        Self::new(patient_id, stage, stage.default_tree_id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceVector {
    pub bandwidth_kbps: f64,
    pub compute_units: f64,
    pub cache_quota_bytes: f64,
}

impl ResourceVector {
    pub fn components(&self) -> [f64; 3] {
        [self.bandwidth_kbps, self.compute_units, self.cache_quota_bytes]
    }

    pub fn from_components(c: [f64; 3]) -> Self {
        ResourceVector {
            bandwidth_kbps: c[0],
            compute_units: c[1],
            cache_quota_bytes: c[2],
        }
    }
}

/// One allocation epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourcePlan {
    pub epoch: SimTime,
    pub demands: BTreeMap<String, ResourceVector>,
    pub risk_levels: BTreeMap<String, RiskLevel>,
    pub allocations: BTreeMap<String, ResourceVector>,
    pub capacities: ResourceVector,
    pub used: ResourceVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SessionOutcome {
    Success,
    Failure,
}

/// Accounting for one closed therapy session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionRecord {
    pub session_id: String,
    pub robot_id: String,
    pub patient_id: String,
    pub tree_id: String,
    pub stage: TherapyStage,
    pub outcome: SessionOutcome,
    pub steps: u64,
    pub event_count: u64,
    pub positive_responses: u64,
    pub started_at: SimTime,
    pub duration_ms: u64,
}

impl SessionRecord {
    pub fn positive_fraction(&self) -> f64 {
        if self.event_count == 0 {
            0.0
        } else {
            self.positive_responses as f64 / self.event_count as f64
        }
    }
}
