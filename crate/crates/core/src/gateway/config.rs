use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behavior_tree::TreeCatalog;
use crate::cloud_services::{EdgeCandidate, RiskPolicy};
use crate::edge_robot::{EmergencyRuleSet, DEFAULT_BEAT_MS, DEFAULT_FUSION_WINDOW_MS, DEFAULT_MAX_RETRIES};
use crate::iot_sensors::{default_profiles, AnomalyScript, SensorProfile};
use crate::patient_and_expert_models::{ExpertMode, ProgressionRule, ResponseModel};
use crate::protocol::{Interval, PhysicalBounds, ResourceVector, SensorKind, TherapyStage};
use crate::sim_kernel::{LinkModel, SimTime};

/// Invalid scenario, located by a dotted field path.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub duration_ms: u64,
    pub links: LinksConfig,
    pub sensors: SensorsConfig,
    pub edge: EdgeConfig,
    pub cloud: CloudConfig,
    pub patients: Vec<PatientConfig>,
    pub expert: ExpertConfig,
    pub response_model: ResponseModel,
    pub metrics: QoeParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 0,
            duration_ms: 600_000,
            links: LinksConfig::default(),
            sensors: SensorsConfig::default(),
            edge: EdgeConfig::default(),
            cloud: CloudConfig::default(),
            patients: vec![PatientConfig::new("p1")],
            expert: ExpertConfig::default(),
            response_model: ResponseModel::default(),
            metrics: QoeParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub latency_ms: u64,
    pub bandwidth_kbps: u64,
}

impl LinkSpec {
    pub fn model(&self, name: &str) -> LinkModel {
        LinkModel {
            name: name.to_string(),
            latency_ms: self.latency_ms,
            bandwidth_kbps: self.bandwidth_kbps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinksConfig {
    pub edge_cloud: LinkSpec,
    pub expert_cloud: LinkSpec,
}

impl Default for LinksConfig {
    fn default() -> Self {
        LinksConfig {
            edge_cloud: LinkSpec {
                latency_ms: 20,
                bandwidth_kbps: 1000,
            },
            expert_cloud: LinkSpec {
                latency_ms: 50,
                bandwidth_kbps: 2000,
            },
        }
    }
}

/// Partial override of a default sensor profile.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_period_ms: Option<u64>,
}

impl ProfileOverride {
    pub fn apply(&self, p: &mut SensorProfile) {
        if let Some(v) = self.baseline {
            p.baseline = v;
        }
        if let Some(v) = self.amplitude {
            p.amplitude = v;
        }
        if let Some(v) = self.period_ms {
            p.period_ms = v;
        }
        if let Some(v) = self.noise_sd {
            p.noise_sd = v;
        }
        if let Some(v) = self.sample_period_ms {
            p.sample_period_ms = v;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnomalyConfig {
    pub patient_id: String,
    pub kind: SensorKind,
    pub onset: SimTime,
    pub duration_ms: u64,
    pub delta: f64,
}

impl AnomalyConfig {
    pub fn script(&self) -> AnomalyScript {
        AnomalyScript {
            kind: self.kind,
            onset: self.onset,
            duration_ms: self.duration_ms,
            delta: self.delta,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorsConfig {
    /// Physical bounds overriding the built-in table.
    pub bounds: BTreeMap<SensorKind, Interval>,
    /// Applied to every patient before per-patient overrides.
    pub profiles: BTreeMap<SensorKind, ProfileOverride>,
    pub anomalies: Vec<AnomalyConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EdgeConfig {
    pub fusion_window_ms: u64,
    pub beat_ms: u64,
    /// Idle time between the end of one session and the start of the next.
    pub session_gap_ms: u64,
    pub first_session_ms: u64,
    pub max_retries: u32,
    pub emergency_rules: EmergencyRuleSet,
    pub network_type: String,
    /// Robot compute, in units per millisecond.
    pub compute_capacity: f64,
    /// Cost of analysing one fused window.
    pub analysis_cycles: u64,
    /// Candidate access points; empty means a direct link.
    pub access_points: Vec<EdgeCandidate>,
    /// Extra behavior trees loaded on top of the built-ins.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree_dir: Option<PathBuf>,
}

impl Default for EdgeConfig {
    fn default() -> Self {
        EdgeConfig {
            fusion_window_ms: DEFAULT_FUSION_WINDOW_MS,
            beat_ms: DEFAULT_BEAT_MS,
            session_gap_ms: 30_000,
            first_session_ms: 1_000,
            max_retries: DEFAULT_MAX_RETRIES,
            emergency_rules: EmergencyRuleSet::default(),
            network_type: "wifi".into(),
            compute_capacity: 2.0,
            analysis_cycles: 4_000,
            access_points: Vec::new(),
            tree_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CloudConfig {
    pub risk: RiskPolicy,
    pub capacities: ResourceVector,
    pub default_demand: ResourceVector,
    pub epoch_ms: u64,
    pub load_penalty_ms: u64,
    pub cache_capacity_bytes: u64,
    pub asset_size_bytes: u64,
    pub history_depth: usize,
    /// Cloud compute, in units per millisecond.
    pub compute_capacity: f64,
}

impl Default for CloudConfig {
    fn default() -> Self {
        CloudConfig {
            risk: RiskPolicy::default(),
            capacities: ResourceVector {
                bandwidth_kbps: 1000.0,
                compute_units: 100.0,
                cache_quota_bytes: 4_000_000.0,
            },
            default_demand: ResourceVector {
                bandwidth_kbps: 400.0,
                compute_units: 10.0,
                cache_quota_bytes: 1_000_000.0,
            },
            epoch_ms: 60_000,
            load_penalty_ms: 5,
            cache_capacity_bytes: 200_000,
            asset_size_bytes: 50_000,
            history_depth: 32,
            compute_capacity: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatientConfig {
    pub patient_id: String,
    #[serde(default = "default_stage")]
    pub stage: TherapyStage,
    #[serde(default = "default_engagement")]
    pub engagement: f64,
    #[serde(default = "default_engagement")]
    pub cooperation_bias: f64,
    /// Starting tree; defaults to the stage's first tree.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand: Option<ResourceVector>,
    #[serde(default)]
    pub sensors: BTreeMap<SensorKind, ProfileOverride>,
}

fn default_stage() -> TherapyStage {
    TherapyStage::Entry
}

fn default_engagement() -> f64 {
    0.8
}

impl PatientConfig {
    pub fn new(patient_id: impl Into<String>) -> Self {
        PatientConfig {
            patient_id: patient_id.into(),
            stage: default_stage(),
            engagement: default_engagement(),
            cooperation_bias: default_engagement(),
            tree_id: None,
            demand: None,
            sensors: BTreeMap::new(),
        }
    }

    pub fn robot_id(&self) -> String {
        format!("robot:{}", self.patient_id)
    }

    pub fn tree(&self) -> String {
        self.tree_id
            .clone()
            .unwrap_or_else(|| self.stage.default_tree_id().to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpertConfig {
    pub expert_id: String,
    pub mode: ExpertMode,
    pub ack_delay_ms: u64,
    pub k: usize,
    pub theta: f64,
    /// A human steers through the API; scripted stage changes are off.
    pub live: bool,
    /// Acknowledgment fallback used in live mode.
    pub live_ack_timeout_ms: u64,
    /// Re-check interval for advancement held back by Conservative mode.
    pub poll_ms: u64,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        ExpertConfig {
            expert_id: "expert-1".into(),
            mode: ExpertMode::AutoAdvance,
            ack_delay_ms: 5_000,
            k: 3,
            theta: 0.6,
            live: false,
            live_ack_timeout_ms: 60_000,
            poll_ms: 10_000,
        }
    }
}

impl ExpertConfig {
    pub fn progression(&self) -> ProgressionRule {
        ProgressionRule {
            k: self.k,
            theta: self.theta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QoeParams {
    pub w1: f64,
    pub w2: f64,
    pub latency_ref_ms: f64,
}

impl Default for QoeParams {
    fn default() -> Self {
        QoeParams {
            w1: 1.0,
            w2: 0.5,
            latency_ref_ms: 200.0,
        }
    }
}

impl ScenarioConfig {
    /// Parse and fully validate a JSON scenario.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::new(if path == "." { "$".into() } else { path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        crate::canonical::to_string(self)
    }

    pub fn bounds(&self) -> PhysicalBounds {
        PhysicalBounds::with_overrides(&self.sensors.bounds)
    }

    pub fn catalog(&self) -> Result<TreeCatalog, ConfigError> {
        match &self.edge.tree_dir {
            None => Ok(TreeCatalog::builtin()),
            Some(dir) => TreeCatalog::builtin_with_dir(dir).map_err(|e| ConfigError::new("edge.tree_dir", e.to_string())),
        }
    }

    /// Sensor profiles for one patient after global and per-patient overrides.
    pub fn profiles_for(&self, patient: &PatientConfig) -> BTreeMap<SensorKind, SensorProfile> {
        let mut profiles = default_profiles();
        for (kind, p) in profiles.iter_mut() {
            if let Some(o) = self.sensors.profiles.get(kind) {
                o.apply(p);
            }
            if let Some(o) = patient.sensors.get(kind) {
                o.apply(p);
            }
        }
        profiles
    }

    pub fn demand_for(&self, patient: &PatientConfig) -> ResourceVector {
        patient.demand.unwrap_or(self.cloud.default_demand)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |path: &str, msg: &str| Err(ConfigError::new(path, msg));
        if self.duration_ms == 0 {
            return err("duration_ms", "must be positive");
        }
        for (name, l) in [("edge_cloud", &self.links.edge_cloud), ("expert_cloud", &self.links.expert_cloud)] {
            if l.bandwidth_kbps == 0 {
                return err(&format!("links.{name}.bandwidth_kbps"), "must be positive");
            }
        }

        let bounds = self.bounds();
        for (kind, b) in &self.sensors.bounds {
            if !(b.lo < b.hi) {
                return err(&format!("sensors.bounds.{}", kind.as_str()), "lo must be below hi");
            }
        }

        let e = &self.edge;
        for (name, v) in [("fusion_window_ms", e.fusion_window_ms), ("beat_ms", e.beat_ms)] {
            if v == 0 {
                return err(&format!("edge.{name}"), "must be positive");
            }
        }
        if !(e.compute_capacity > 0.0) {
            return err("edge.compute_capacity", "must be positive");
        }
        e.emergency_rules
            .check(&bounds)
            .map_err(|m| ConfigError::new("edge.emergency_rules", m))?;
        let mut ap_ids = BTreeSet::new();
        for (i, ap) in e.access_points.iter().enumerate() {
            if ap.node_id.is_empty() || !ap_ids.insert(&ap.node_id) {
                return err(&format!("edge.access_points[{i}].node_id"), "must be non-empty and unique");
            }
        }
        let catalog = self.catalog()?;

        let c = &self.cloud;
        self.cloud.risk.check().map_err(|m| ConfigError::new("cloud.risk", m))?;
        if c.epoch_ms == 0 {
            return err("cloud.epoch_ms", "must be positive");
        }
        if !(c.compute_capacity > 0.0) {
            return err("cloud.compute_capacity", "must be positive");
        }
        if c.asset_size_bytes > c.cache_capacity_bytes {
            return err("cloud.asset_size_bytes", "must fit in cache_capacity_bytes");
        }
        for (name, v) in [("capacities", c.capacities), ("default_demand", c.default_demand)] {
            if v.components().iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return err(&format!("cloud.{name}"), "components must be finite and non-negative");
            }
        }

        if self.patients.is_empty() {
            return err("patients", "at least one patient is required");
        }
        let mut ids = BTreeSet::new();
        for (i, p) in self.patients.iter().enumerate() {
            let at = |f: &str| format!("patients[{i}].{f}");
            if p.patient_id.is_empty() || p.patient_id.contains(':') {
                return err(&at("patient_id"), "must be non-empty and contain no ':'");
            }
            if !ids.insert(p.patient_id.as_str()) {
                return err(&at("patient_id"), "duplicate patient id");
            }
            for (name, v) in [("engagement", p.engagement), ("cooperation_bias", p.cooperation_bias)] {
                if !(0.0..=1.0).contains(&v) {
                    return err(&at(name), "must lie in [0,1]");
                }
            }
            match catalog.get(&p.tree()) {
                Ok(t) if t.stage == p.stage => {}
                Ok(_) => return err(&at("tree_id"), &format!("{} is not a {} tree", p.tree(), p.stage)),
                Err(e) => return err(&at("tree_id"), &e.to_string()),
            }
            if let Some(d) = p.demand {
                if d.components().iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                    return err(&at("demand"), "components must be finite and non-negative");
                }
            }
            for (kind, prof) in self.profiles_for(p) {
                prof.check().map_err(|m| ConfigError::new(at(&format!("sensors.{}", kind.as_str())), m))?;
            }
        }
        for (i, a) in self.sensors.anomalies.iter().enumerate() {
            if !ids.contains(a.patient_id.as_str()) {
                return err(&format!("sensors.anomalies[{i}].patient_id"), "unknown patient");
            }
            if !a.delta.is_finite() {
                return err(&format!("sensors.anomalies[{i}].delta"), "must be finite");
            }
        }

        let x = &self.expert;
        if x.expert_id.is_empty() {
            return err("expert.expert_id", "must be non-empty");
        }
        if x.k == 0 {
            return err("expert.k", "must be at least 1");
        }
        if !(0.0..=1.0).contains(&x.theta) {
            return err("expert.theta", "must lie in [0,1]");
        }
        if x.poll_ms == 0 {
            return err("expert.poll_ms", "must be positive");
        }
        self.response_model
            .check()
            .map_err(|m| ConfigError::new("response_model", m))?;
        let q = self.metrics;
        if !(q.latency_ref_ms > 0.0) || !q.w1.is_finite() || !q.w2.is_finite() {
            return err("metrics", "latency_ref_ms must be positive and weights finite");
        }
        Ok(())
    }
}
