//! Simulated patients (humor stage, engagement, stochastic responses) and the
//! scripted expert policy used in headless runs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::protocol::{
    ExpertRecommendation, PatientResponse, Recommendation, RiskLevel, SessionOutcome, TherapyStage,
};
use crate::sim_kernel::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResponseModel {
    pub match_same: f64,
    pub match_one_above: f64,
    pub match_one_below: f64,
    pub match_other: f64,
    /// Share of positive responses that are laughs; the rest are verbal replies.
    pub laugh_share: f64,
    /// Share of negative responses that are silence; the rest are withdrawals.
    pub no_response_share: f64,
    pub engagement_gain: f64,
    pub engagement_loss: f64,
}

impl Default for ResponseModel {
    fn default() -> Self {
        ResponseModel {
            match_same: 1.0,
            match_one_above: 0.5,
            match_one_below: 0.8,
            match_other: 0.2,
            laugh_share: 0.6,
            no_response_share: 0.8,
            engagement_gain: 0.02,
            engagement_loss: 0.05,
        }
    }
}

impl ResponseModel {
    /// Multiplier for an action written for `action` shown to a patient at `patient`.
    pub fn stage_match(&self, action: TherapyStage, patient: TherapyStage) -> f64 {
        let (a, p) = (action.index() as i64, patient.index() as i64);
        match a - p {
            0 => self.match_same,
            1 => self.match_one_above,
            -1 => self.match_one_below,
            _ => self.match_other,
        }
    }

    pub fn check(&self) -> Result<(), String> {
        let fields = [
            ("match_same", self.match_same),
            ("match_one_above", self.match_one_above),
            ("match_one_below", self.match_one_below),
            ("match_other", self.match_other),
            ("laugh_share", self.laugh_share),
            ("no_response_share", self.no_response_share),
            ("engagement_gain", self.engagement_gain),
            ("engagement_loss", self.engagement_loss),
        ];
        for (name, v) in fields {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} must lie in [0,1], got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub tree_id: String,
    pub stage: TherapyStage,
    pub outcome: SessionOutcome,
    pub positive_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientModel {
    pub patient_id: String,
    pub stage: TherapyStage,
    pub engagement: f64,
    pub cooperation_bias: f64,
    pub history: Vec<SessionSummary>,
}

impl PatientModel {
    pub fn new(patient_id: impl Into<String>, stage: TherapyStage, engagement: f64, cooperation_bias: f64) -> Self {
        PatientModel {
            patient_id: patient_id.into(),
            stage,
            engagement: engagement.clamp(0.0, 1.0),
            cooperation_bias: cooperation_bias.clamp(0.0, 1.0),
            history: Vec::new(),
        }
    }

    pub fn positive_probability(&self, action_stage: TherapyStage, model: &ResponseModel) -> f64 {
        (self.engagement * self.cooperation_bias * model.stage_match(action_stage, self.stage)).clamp(0.0, 1.0)
    }

    /// Draw a response to an action from `action_stage` and update engagement.
    pub fn respond<R: Rng + ?Sized>(
        &mut self,
        action_stage: TherapyStage,
        model: &ResponseModel,
        rng: &mut R,
    ) -> PatientResponse {
        let p = self.positive_probability(action_stage, model);
        let positive = rng.random::<f64>() < p;
        let split: f64 = rng.random();
        let response = match (positive, split) {
            (true, u) if u < model.laugh_share => PatientResponse::Laugh,
            (true, _) => PatientResponse::VerbalReply,
            (false, u) if u < model.no_response_share => PatientResponse::NoResponse,
            (false, _) => PatientResponse::Withdrawal,
        };
        match response {
            PatientResponse::Laugh | PatientResponse::VerbalReply => self.engagement += model.engagement_gain,
            PatientResponse::Withdrawal => self.engagement -= model.engagement_loss,
            PatientResponse::NoResponse => {}
        }
        self.engagement = self.engagement.clamp(0.0, 1.0);
        response
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProgressionRule {
    pub k: usize,
    pub theta: f64,
}

impl Default for ProgressionRule {
    fn default() -> Self {
        ProgressionRule { k: 3, theta: 0.6 }
    }
}

/// True iff the last `k` sessions all succeeded with positive fraction ≥ θ.
///
/// `history` must already be restricted to the patient's current stage.
pub fn maybe_advance(history: &[SessionSummary], rule: &ProgressionRule) -> bool {
    if rule.k == 0 || history.len() < rule.k {
        return false;
    }
    history[history.len() - rule.k..]
        .iter()
        .all(|s| s.outcome == SessionOutcome::Success && s.positive_fraction >= rule.theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExpertMode {
    AutoAdvance,
    Conservative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertPolicy {
    pub expert_id: String,
    pub mode: ExpertMode,
    pub ack_delay_ms: u64,
    /// A human is steering: scripted stage changes are off, acks remain as fallback.
    pub live: bool,
}

/// Request to move a patient one stage up.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdvanceSignal {
    pub patient_id: String,
    pub from: TherapyStage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingAlert {
    pub alert_id: String,
    pub received_at: SimTime,
}

/// What the expert can see about one patient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DossierView {
    pub patient_id: String,
    pub stage: TherapyStage,
    pub risk: RiskLevel,
    pub alerts: Vec<PendingAlert>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExpertStep {
    pub recommendations: Vec<ExpertRecommendation>,
    /// Signals held back for a later step.
    pub deferred: Vec<AdvanceSignal>,
}

/// Decide the recommendations for one patient at `now`.
pub fn expert_step(policy: &ExpertPolicy, view: &DossierView, signals: &[AdvanceSignal], now: SimTime) -> ExpertStep {
    let mut out = ExpertStep::default();
    let rec = |recommendation| ExpertRecommendation {
        expert_id: policy.expert_id.clone(),
        patient_id: view.patient_id.clone(),
        issued_at: now,
        recommendation,
    };
    for a in &view.alerts {
        if a.received_at + policy.ack_delay_ms <= now {
            out.recommendations.push(rec(Recommendation::EmergencyAck {
                alert_id: a.alert_id.clone(),
            }));
        }
    }
    let mut advanced = false;
    for s in signals.iter().filter(|s| s.patient_id == view.patient_id) {
        if policy.live || s.from != view.stage {
            continue;
        }
        if policy.mode == ExpertMode::Conservative && view.risk > RiskLevel::Low {
            out.deferred.push(s.clone());
            continue;
        }
        if let (false, Some(target)) = (advanced, view.stage.next()) {
            out.recommendations.push(rec(Recommendation::TherapyStageChange { target }));
            advanced = true;
        }
    }
    out
}

#[cfg(test)]
mod tests;
