use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::*;

/// One broken invariant: which field, and the rule it broke.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Violation {
            field: field.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

pub type ValidationResult = Result<(), Vec<Violation>>;

/// Score thresholds for Moderate, High and Critical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskThresholds {
    pub moderate: u32,
    pub high: u32,
    pub critical: u32,
}

impl Default for RiskThresholds {
    fn default() -> Self {
        RiskThresholds {
            moderate: 1,
            high: 3,
            critical: 6,
        }
    }
}

impl RiskThresholds {
    pub fn bucket(&self, score: u32) -> RiskLevel {
        if score >= self.critical {
            RiskLevel::Critical
        } else if score >= self.high {
            RiskLevel::High
        } else if score >= self.moderate {
            RiskLevel::Moderate
        } else {
            RiskLevel::Low
        }
    }
}

/// Configuration the context-dependent rules are checked against.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationContext {
    pub bounds: PhysicalBounds,
    pub risk_thresholds: RiskThresholds,
    /// Tree ids allowed per stage.
    pub catalog: BTreeMap<TherapyStage, Vec<String>>,
}

impl Default for ValidationContext {
    fn default() -> Self {
        ValidationContext {
            bounds: PhysicalBounds::default(),
            risk_thresholds: RiskThresholds::default(),
            catalog: TherapyStage::ALL
                .into_iter()
                .map(|s| (s, s.builtin_tree_ids().iter().map(|t| t.to_string()).collect()))
                .collect(),
        }
    }
}

pub trait Validate {
    fn violations(&self, ctx: &ValidationContext) -> Vec<Violation>;

    fn validate_in(&self, ctx: &ValidationContext) -> ValidationResult {
        let v = self.violations(ctx);
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }

    fn validate(&self) -> ValidationResult {
        self.validate_in(&ValidationContext::default())
    }
}

fn non_empty(out: &mut Vec<Violation>, field: &str, value: &str) {
    if value.trim().is_empty() {
        out.push(Violation::new(field, "must be non-empty"));
    }
}

fn in_unit(out: &mut Vec<Violation>, field: &str, value: f64) {
    if !(0.0..=1.0).contains(&value) {
        out.push(Violation::new(field, format!("{field} ∈ [0,1]")));
    }
}

impl Validate for SensorFrame {
    fn violations(&self, ctx: &ValidationContext) -> Vec<Violation> {
        let mut out = Vec::new();
        non_empty(&mut out, "sensor_id", &self.sensor_id);
        non_empty(&mut out, "patient_id", &self.patient_id);
        let bound = ctx.bounds.get(self.kind);
        if !bound.contains(self.value) {
            out.push(Violation::new("value", format!("{} ∈ {}", self.kind, bound)));
        }
        out
    }
}

impl Validate for InteractionEvent {
    fn violations(&self, _ctx: &ValidationContext) -> Vec<Violation> {
        let mut out = Vec::new();
        non_empty(&mut out, "session_id", &self.session_id);
        non_empty(&mut out, "action", &self.action);
        out
    }
}

impl InteractionEvent {
    /// The modality must be one of the stage's data types.
    pub fn validate_for_stage(&self, stage: TherapyStage) -> ValidationResult {
        let mut out = self.violations(&ValidationContext::default());
        if !stage.modalities().contains(&self.modality) {
            out.push(Violation::new(
                "modality",
                format!("{:?} not a {stage} data type", self.modality),
            ));
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }
}

fn check_summary(out: &mut Vec<Violation>, field: String, s: &StatSummary) {
    match (s.count, s.mean, s.min, s.max) {
        (0, None, None, None) => {}
        (0, ..) => out.push(Violation::new(field, "empty summary carries no statistics")),
        (_, Some(mean), Some(min), Some(max)) => {
            if !(min.is_finite() && max.is_finite() && mean.is_finite()) {
                out.push(Violation::new(field, "statistics must be finite"));
            } else if !(min <= mean && mean <= max) {
                out.push(Violation::new(field, "min ≤ mean ≤ max"));
            }
        }
        _ => out.push(Violation::new(field, "non-empty summary needs mean, min and max")),
    }
}

impl Validate for FusedRecord {
    fn violations(&self, _ctx: &ValidationContext) -> Vec<Violation> {
        let mut out = Vec::new();
        non_empty(&mut out, "patient_id", &self.patient_id);
        non_empty(&mut out, "robot_id", &self.robot_id);
        if self.window.t0 >= self.window.t1 {
            out.push(Violation::new("window", "t0 < t1"));
        }
        for (kind, s) in &self.vitals {
            if !kind.is_medical() {
                out.push(Violation::new(format!("vitals.{kind}"), "vitals hold medical kinds only"));
            }
            check_summary(&mut out, format!("vitals.{kind}"), s);
        }
        for (kind, s) in &self.ambient {
            if kind.is_medical() {
                out.push(Violation::new(format!("ambient.{kind}"), "ambient holds ambient kinds only"));
            }
            check_summary(&mut out, format!("ambient.{kind}"), s);
        }
        for (i, ev) in self.interactions.iter().enumerate() {
            if !self.window.contains(ev.t) {
                out.push(Violation::new(format!("interactions[{i}].t"), "t ∈ [t0, t1)"));
            }
        }
        if self.interactions.windows(2).any(|w| w[0].t > w[1].t) {
            out.push(Violation::new("interactions", "sorted by t"));
        }
        non_empty(&mut out, "network_info.network_type", &self.network_info.network_type);
        in_unit(
            &mut out,
            "network_info.communication_quality",
            self.network_info.communication_quality,
        );
        out
    }
}

impl Validate for RiskAssessment {
    fn violations(&self, ctx: &ValidationContext) -> Vec<Violation> {
        let mut out = Vec::new();
        non_empty(&mut out, "patient_id", &self.patient_id);
        let expected = if self.active_alerts.is_empty() {
            ctx.risk_thresholds.bucket(self.score)
        } else {
            RiskLevel::Critical
        };
        if self.level != expected {
            out.push(Violation::new(
                "level",
                format!("score {} buckets to {expected:?}", self.score),
            ));
        }
        if self.level > RiskLevel::Low && self.factors.is_empty() && self.active_alerts.is_empty() {
            out.push(Violation::new("factors", "non-empty when level > Low"));
        }
        let points: u32 = self.factors.iter().map(|f| f.points).sum();
        if points != self.score {
            out.push(Violation::new("score", "score = sum of factor points"));
        }
        out
    }
}

impl Validate for EmergencyAlert {
    fn violations(&self, _ctx: &ValidationContext) -> Vec<Violation> {
        let mut out = Vec::new();
        non_empty(&mut out, "alert_id", &self.alert_id);
        non_empty(&mut out, "patient_id", &self.patient_id);
        if self.priority != RiskLevel::Critical {
            out.push(Violation::new("priority", "alerts carry Critical priority"));
        }
        if !self.cause.direction.violated(self.cause.value, self.cause.threshold) {
            out.push(Violation::new(
                "cause",
                format!(
                    "{} {} does not violate threshold {} ({:?})",
                    self.cause.kind, self.cause.value, self.cause.threshold, self.cause.direction
                ),
            ));
        }
        out
    }
}

impl Validate for ExpertRecommendation {
    fn violations(&self, _ctx: &ValidationContext) -> Vec<Violation> {
        let mut out = Vec::new();
        non_empty(&mut out, "expert_id", &self.expert_id);
        non_empty(&mut out, "patient_id", &self.patient_id);
        match &self.recommendation {
            Recommendation::PrescriptionUpdate { text } | Recommendation::Instruction { text } => {
                non_empty(&mut out, "payload.text", text)
            }
            Recommendation::EmergencyAck { alert_id } => non_empty(&mut out, "payload.alert_id", alert_id),
            Recommendation::TherapyStageChange { .. } => {}
        }
        out
    }
}

impl Validate for TherapyCommand {
    fn violations(&self, ctx: &ValidationContext) -> Vec<Violation> {
        let mut out = Vec::new();
        non_empty(&mut out, "patient_id", &self.patient_id);
        let allowed = ctx.catalog.get(&self.stage);
        if !allowed.is_some_and(|ids| ids.iter().any(|id| id == &self.tree_id)) {
            out.push(Violation::new(
                "tree_id",
                format!("{} is not a {} tree", self.tree_id, self.stage),
            ));
        }
        out
    }
}

// Floating-point slack for capacity sums.
const CAPACITY_EPS: f64 = 1e-6;

impl Validate for ResourcePlan {
    fn violations(&self, _ctx: &ValidationContext) -> Vec<Violation> {
        let mut out = Vec::new();
        let names = ["bandwidth_kbps", "compute_units", "cache_quota_bytes"];
        let caps = self.capacities.components();
        let mut sums = [0.0; 3];
        for (patient, alloc) in &self.allocations {
            for (i, v) in alloc.components().into_iter().enumerate() {
                if !(v.is_finite() && v >= 0.0) {
                    out.push(Violation::new(
                        format!("allocations.{patient}.{}", names[i]),
                        "allocation ≥ 0",
                    ));
                }
                sums[i] += v;
            }
        }
        for i in 0..3 {
            if sums[i] > caps[i] + CAPACITY_EPS * caps[i].max(1.0) {
                out.push(Violation::new(
                    format!("allocations.{}", names[i]),
                    format!("sum {} ≤ capacity {}", sums[i], caps[i]),
                ));
            }
            if (sums[i] - self.used.components()[i]).abs() > CAPACITY_EPS * caps[i].max(1.0) {
                out.push(Violation::new(format!("used.{}", names[i]), "used = sum of allocations"));
            }
        }
        out
    }
}

impl Validate for SessionRecord {
    fn violations(&self, ctx: &ValidationContext) -> Vec<Violation> {
        let mut out = Vec::new();
        non_empty(&mut out, "session_id", &self.session_id);
        if self.steps == 0 {
            out.push(Violation::new("steps", "steps ≥ 1"));
        }
        if self.positive_responses > self.event_count {
            out.push(Violation::new("positive_responses", "positive_responses ≤ event_count"));
        }
        if !ctx
            .catalog
            .get(&self.stage)
            .is_some_and(|ids| ids.iter().any(|id| id == &self.tree_id))
        {
            out.push(Violation::new("tree_id", format!("{} is not a {} tree", self.tree_id, self.stage)));
        }
        out
    }
}
