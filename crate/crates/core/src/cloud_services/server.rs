use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::{allocate, CacheAccess, CloudError, LruCache, RiskPolicy};
use crate::patient_and_expert_models::{maybe_advance, AdvanceSignal, ProgressionRule, SessionSummary};
use crate::protocol::{
    EmergencyAlert, ExpertRecommendation, FusedRecord, Recommendation, ResourcePlan, ResourceVector,
    RiskAssessment, RiskLevel, SessionRecord, TherapyCommand, TherapyStage, Validate,
    ValidationContext,
};
use crate::sim_kernel::SimTime;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientDossier {
    pub patient_id: String,
    pub robot_id: String,
    pub records: VecDeque<FusedRecord>,
    pub risk: RiskAssessment,
    pub stage: TherapyStage,
    pub outstanding_alerts: BTreeMap<String, EmergencyAlert>,
    pub cleared_alerts: BTreeSet<String>,
    pub recommendations: Vec<ExpertRecommendation>,
    pub sessions: Vec<SessionSummary>,
}

impl PatientDossier {
    fn new(patient_id: &str, robot_id: &str, stage: TherapyStage) -> Self {
        PatientDossier {
            patient_id: patient_id.to_string(),
            robot_id: robot_id.to_string(),
            records: VecDeque::new(),
            risk: RiskPolicy::default().assess(patient_id, None, Vec::new(), SimTime::ZERO),
            stage,
            outstanding_alerts: BTreeMap::new(),
            cleared_alerts: BTreeSet::new(),
            recommendations: Vec::new(),
            sessions: Vec::new(),
        }
    }

    pub fn latest(&self) -> Option<&FusedRecord> {
        self.records.back()
    }

    /// Sessions run at the current stage, oldest first.
    pub fn stage_sessions(&self) -> Vec<SessionSummary> {
        self.sessions.iter().filter(|s| s.stage == self.stage).cloned().collect()
    }
}

/// Result of re-scoring a dossier.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskUpdate {
    pub assessment: RiskAssessment,
    pub previous: RiskLevel,
}

impl RiskUpdate {
    pub fn changed(&self) -> bool {
        self.assessment.level != self.previous
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Routed {
    /// Forward to the patient's robot.
    Command { robot_id: String, command: TherapyCommand },
    AlertCleared { alert_id: String, risk: RiskUpdate },
    Logged,
}

/// Ingest, risk evaluation, alert tracking and recommendation routing.
#[derive(Debug, Clone)]
pub struct CognitiveDataServer {
    pub policy: RiskPolicy,
    pub progression: ProgressionRule,
    pub history_depth: usize,
    pub dossiers: BTreeMap<String, PatientDossier>,
    pub feedback: Vec<FeedbackRecord>,
}

impl CognitiveDataServer {
    pub fn new(policy: RiskPolicy, progression: ProgressionRule, history_depth: usize) -> Self {
        CognitiveDataServer {
            policy,
            progression,
            history_depth: history_depth.max(1),
            dossiers: BTreeMap::new(),
            feedback: Vec::new(),
        }
    }

    pub fn register(&mut self, patient_id: &str, robot_id: &str, stage: TherapyStage) {
        let mut d = PatientDossier::new(patient_id, robot_id, stage);
        d.risk = self.policy.assess(patient_id, None, Vec::new(), SimTime::ZERO);
        self.dossiers.insert(patient_id.to_string(), d);
    }

    pub fn dossier(&self, patient_id: &str) -> Result<&PatientDossier, CloudError> {
        self.dossiers
            .get(patient_id)
            .ok_or_else(|| CloudError::UnknownPatient(patient_id.to_string()))
    }

    fn dossier_mut(&mut self, patient_id: &str) -> Result<&mut PatientDossier, CloudError> {
        self.dossiers
            .get_mut(patient_id)
            .ok_or_else(|| CloudError::UnknownPatient(patient_id.to_string()))
    }

    fn rescore(&mut self, patient_id: &str, now: SimTime) -> Result<RiskUpdate, CloudError> {
        let policy = self.policy.clone();
        let d = self.dossier_mut(patient_id)?;
        let previous = d.risk.level;
        let alerts = d.outstanding_alerts.keys().cloned().collect();
        d.risk = policy.assess(patient_id, d.latest(), alerts, now);
        Ok(RiskUpdate {
            assessment: d.risk.clone(),
            previous,
        })
    }

    pub fn ingest(&mut self, record: FusedRecord, now: SimTime) -> Result<RiskUpdate, CloudError> {
        let depth = self.history_depth;
        let d = self.dossier_mut(&record.patient_id)?;
        let id = record.patient_id.clone();
        d.records.push_back(record);
        while d.records.len() > depth {
            d.records.pop_front();
        }
        self.rescore(&id, now)
    }

    pub fn on_alert(&mut self, alert: EmergencyAlert, now: SimTime) -> Result<RiskUpdate, CloudError> {
        let id = alert.patient_id.clone();
        self.dossier_mut(&id)?
            .outstanding_alerts
            .insert(alert.alert_id.clone(), alert);
        self.rescore(&id, now)
    }

    /// Record a closed session; signals when the progression rule fires.
    pub fn on_session(&mut self, record: &SessionRecord) -> Result<Option<AdvanceSignal>, CloudError> {
        let rule = self.progression;
        let d = self.dossier_mut(&record.patient_id)?;
        d.sessions.push(SessionSummary {
            tree_id: record.tree_id.clone(),
            stage: record.stage,
            outcome: record.outcome,
            positive_fraction: record.positive_fraction(),
        });
        if record.stage != d.stage || d.stage.next().is_none() {
            return Ok(None);
        }
        Ok(maybe_advance(&d.stage_sessions(), &rule).then(|| AdvanceSignal {
            patient_id: d.patient_id.clone(),
            from: d.stage,
        }))
    }

    /// Checks that would make `route_recommendation` fail, without mutating anything.
    pub fn precheck(&self, rec: &ExpertRecommendation, ctx: &ValidationContext) -> Result<(), CloudError> {
        rec.validate_in(ctx).map_err(CloudError::Invalid)?;
        let d = self.dossier(&rec.patient_id)?;
        if let Recommendation::EmergencyAck { alert_id } = &rec.recommendation {
            if !d.outstanding_alerts.contains_key(alert_id) {
                return Err(CloudError::StaleAck(alert_id.clone()));
            }
        }
        Ok(())
    }

    pub fn route_recommendation(
        &mut self,
        rec: ExpertRecommendation,
        ctx: &ValidationContext,
        now: SimTime,
    ) -> Result<Routed, CloudError> {
        self.precheck(&rec, ctx)?;
        let d = self.dossier_mut(&rec.patient_id)?;
        d.recommendations.push(rec.clone());
        match rec.recommendation {
            Recommendation::TherapyStageChange { target } => {
                d.stage = target;
                Ok(Routed::Command {
                    robot_id: d.robot_id.clone(),
                    command: TherapyCommand::default_for(&rec.patient_id, target),
                })
            }
            Recommendation::EmergencyAck { alert_id } => {
                d.outstanding_alerts.remove(&alert_id);
                d.cleared_alerts.insert(alert_id.clone());
                let risk = self.rescore(&rec.patient_id, now)?;
                Ok(Routed::AlertCleared { alert_id, risk })
            }
            Recommendation::PrescriptionUpdate { .. } | Recommendation::Instruction { .. } => Ok(Routed::Logged),
        }
    }

    pub fn risk_levels(&self) -> BTreeMap<String, RiskLevel> {
        self.dossiers.iter().map(|(k, d)| (k.clone(), d.risk.level)).collect()
    }

    /// Store the integrated resource summary of a completed epoch.
    pub fn feedback_sync(&mut self, record: FeedbackRecord) {
        self.feedback.push(record);
    }
}

/// Realized use of one epoch's plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub epoch_index: u64,
    pub start: SimTime,
    pub end: SimTime,
    pub plan: ResourcePlan,
    pub delivered_bytes: BTreeMap<String, u64>,
    /// Delivered bits over allocated kbps × epoch length, per patient.
    pub utilization: BTreeMap<String, f64>,
    pub total_utilization: f64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub cache_hit_ratio: f64,
}

/// Bits delivered over bits allocated; zero when nothing was allocated.
pub fn utilization(delivered_bytes: u64, allocated_kbps: f64, epoch_ms: u64) -> f64 {
    let budget = allocated_kbps * epoch_ms as f64;
    if budget <= 0.0 {
        0.0
    } else {
        (delivered_bytes * 8) as f64 / budget
    }
}

/// Allocation epochs, edge cache and realized-use bookkeeping.
#[derive(Debug, Clone)]
pub struct ResourceManager {
    pub capacities: ResourceVector,
    pub epoch_ms: u64,
    pub cache: LruCache,
    pub plan: Option<ResourcePlan>,
    epoch_index: u64,
    epoch_start: SimTime,
    delivered: BTreeMap<String, u64>,
    epoch_hits: u64,
    epoch_misses: u64,
}

impl ResourceManager {
    pub fn new(capacities: ResourceVector, epoch_ms: u64, cache_capacity_bytes: u64) -> Self {
        ResourceManager {
            capacities,
            epoch_ms,
            cache: LruCache::new(cache_capacity_bytes),
            plan: None,
            epoch_index: 0,
            epoch_start: SimTime::ZERO,
            delivered: BTreeMap::new(),
            epoch_hits: 0,
            epoch_misses: 0,
        }
    }

    pub fn epoch_index(&self) -> u64 {
        self.epoch_index
    }

    pub fn begin_epoch(
        &mut self,
        start: SimTime,
        demands: &BTreeMap<String, ResourceVector>,
        risk_levels: &BTreeMap<String, RiskLevel>,
    ) -> &ResourcePlan {
        self.epoch_start = start;
        self.delivered = demands.keys().map(|k| (k.clone(), 0)).collect();
        self.epoch_hits = 0;
        self.epoch_misses = 0;
        self.plan.insert(allocate(start, demands, risk_levels, self.capacities))
    }

    pub fn record_delivery(&mut self, patient_id: &str, bytes: u64) {
        *self.delivered.entry(patient_id.to_string()).or_default() += bytes;
    }

    pub fn cache_access(&mut self, asset_id: &str, size: u64) -> Result<CacheAccess, CloudError> {
        let access = self.cache.access(asset_id, size)?;
        match access.outcome {
            super::CacheOutcome::Hit => self.epoch_hits += 1,
            super::CacheOutcome::Miss => self.epoch_misses += 1,
        }
        Ok(access)
    }

    /// Close the running epoch at `end` and summarize it.
    pub fn end_epoch(&mut self, end: SimTime) -> Option<FeedbackRecord> {
        let plan = self.plan.take()?;
        let len = end.since(self.epoch_start);
        let per = |id: &String| plan.allocations.get(id).map_or(0.0, |a| a.bandwidth_kbps);
        let utilization_map = self
            .delivered
            .iter()
            .map(|(id, b)| (id.clone(), utilization(*b, per(id), len)))
            .collect();
        let total_bytes: u64 = self.delivered.values().sum();
        let total = utilization(total_bytes, plan.used.bandwidth_kbps, len);
        let accesses = self.epoch_hits + self.epoch_misses;
        let record = FeedbackRecord {
            epoch_index: self.epoch_index,
            start: self.epoch_start,
            end,
            plan,
            delivered_bytes: std::mem::take(&mut self.delivered),
            utilization: utilization_map,
            total_utilization: total,
            cache_hits: self.epoch_hits,
            cache_misses: self.epoch_misses,
            cache_hit_ratio: if accesses == 0 { 0.0 } else { self.epoch_hits as f64 / accesses as f64 },
        };
        self.epoch_index += 1;
        Some(record)
    }
}
