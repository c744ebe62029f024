use serde::{Deserialize, Serialize};

use crate::protocol::{
    Direction, FusedRecord, RiskAssessment, RiskFactor, RiskLevel, RiskThresholds, SensorKind,
    Statistic,
};
use crate::sim_kernel::SimTime;

/// Points added when a window statistic crosses a bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskRule {
    pub kind: SensorKind,
    pub statistic: Statistic,
    pub bound: f64,
    pub direction: Direction,
    pub points: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RiskPolicy {
    pub rules: Vec<RiskRule>,
    pub thresholds: RiskThresholds,
}

impl Default for RiskPolicy {
    fn default() -> Self {
        use Direction::*;
        use SensorKind::*;
        use Statistic::*;
        let r = |kind, statistic, bound, direction, points| RiskRule {
            kind,
            statistic,
            bound,
            direction,
            points,
        };
        RiskPolicy {
            rules: vec![
                r(SpO2, Min, 90.0, Below, 4),
                r(Heartbeat, Max, 120.0, Above, 2),
                r(Heartbeat, Min, 50.0, Below, 2),
                r(SystolicPressure, Max, 180.0, Above, 2),
                r(SystolicPressure, Min, 80.0, Below, 2),
                r(BodyTemp, Max, 39.5, Above, 2),
                r(BodyTemp, Min, 35.0, Below, 2),
            ],
            thresholds: RiskThresholds::default(),
        }
    }
}

impl RiskPolicy {
    /// Reject rules that would make the score non-monotone in a worsening statistic.
    pub fn check(&self) -> Result<(), String> {
        for (i, r) in self.rules.iter().enumerate() {
            let ok = match r.statistic {
                Statistic::Min => r.direction == Direction::Below,
                Statistic::Max => r.direction == Direction::Above,
                Statistic::Mean => true,
            };
            if !ok {
                return Err(format!("rules[{i}]: a {:?} rule must point outward", r.statistic));
            }
            if !r.bound.is_finite() {
                return Err(format!("rules[{i}]: bound must be finite"));
            }
        }
        let t = self.thresholds;
        if !(t.moderate <= t.high && t.high <= t.critical) {
            return Err("thresholds must be non-decreasing".into());
        }
        Ok(())
    }

    pub fn factors(&self, record: Option<&FusedRecord>) -> Vec<RiskFactor> {
        let Some(record) = record else {
            return Vec::new();
        };
        self.rules
            .iter()
            .filter_map(|rule| {
                let s = record.summary(rule.kind)?;
                let observed = match rule.statistic {
                    Statistic::Min => s.min,
                    Statistic::Max => s.max,
                    Statistic::Mean => s.mean,
                }?;
                rule.direction.violated(observed, rule.bound).then(|| RiskFactor {
                    kind: rule.kind,
                    statistic: rule.statistic,
                    observed,
                    bound: rule.bound,
                    direction: rule.direction,
                    points: rule.points,
                })
            })
            .collect()
    }

    /// Score the latest record; any active alert forces Critical.
    pub fn assess(
        &self,
        patient_id: &str,
        record: Option<&FusedRecord>,
        active_alerts: Vec<String>,
        t: SimTime,
    ) -> RiskAssessment {
        let factors = self.factors(record);
        let score = factors.iter().map(|f| f.points).sum();
        let level = if active_alerts.is_empty() {
            self.thresholds.bucket(score)
        } else {
            RiskLevel::Critical
        };
        RiskAssessment {
            patient_id: patient_id.to_string(),
            level,
            score,
            factors,
            active_alerts,
            t,
        }
    }
}
