use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::QoeParams;
use super::event::{Carried, Event, Notice, CLOUD};
use crate::cloud_services::{CacheOutcome, Placement};
use crate::protocol::{Message, SessionOutcome, TherapyStage};
use crate::sim_kernel::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagePoint {
    pub t: SimTime,
    pub stage: TherapyStage,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionCounts {
    pub success: u64,
    pub failure: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientMetrics {
    pub uplink_messages: u64,
    pub mean_uplink_latency_ms: f64,
    pub alert_latencies_ms: Vec<u64>,
    /// min(1, allocated / demanded bandwidth), averaged over plans.
    pub bandwidth_satisfaction: f64,
    pub qoe: f64,
    pub stage_timeline: Vec<StagePoint>,
    pub sessions: SessionCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch_index: u64,
    pub start: SimTime,
    pub end: SimTime,
    pub total_utilization: f64,
    pub utilization: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GlobalMetrics {
    pub events: u64,
    pub bytes_moved: u64,
    pub deliveries: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub cache_hit_ratio: f64,
    pub compute_units_local: u64,
    pub compute_units_cloud: u64,
    pub stage_changes: u64,
    pub alerts: u64,
    pub epochs: Vec<EpochMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub duration_ms: u64,
    pub qoe_params: QoeParams,
    pub patients: BTreeMap<String, PatientMetrics>,
    pub global: GlobalMetrics,
}

impl RunMetrics {
    pub fn to_json(&self) -> String {
        crate::canonical::to_string(self)
    }
}

/// QoE from bandwidth satisfaction and mean uplink latency, clamped to [0,1].
pub fn qoe(params: &QoeParams, satisfaction: f64, mean_latency_ms: f64) -> f64 {
    (params.w1 * satisfaction - params.w2 * (mean_latency_ms / params.latency_ref_ms)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Default)]
struct PatientAcc {
    uplinks: u64,
    latency_sum: u64,
    alert_latencies: Vec<u64>,
    satisfaction: Vec<f64>,
    timeline: Vec<StagePoint>,
    sessions: SessionCounts,
}

/// Folds trace events into [`RunMetrics`]; the same code serves runs and replays.
#[derive(Debug, Clone, Default)]
pub struct MetricsBuilder {
    seed: u64,
    duration_ms: u64,
    qoe: QoeParams,
    patients: BTreeMap<String, PatientAcc>,
    global: GlobalMetrics,
}

impl MetricsBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, t: SimTime, target: &str, event: &Event) {
        self.global.events += 1;
        match event {
            Event::Deliver(d) => {
                self.global.bytes_moved += d.size;
                self.global.deliveries += 1;
                if target != CLOUD {
                    return;
                }
                let Carried::Message(m) = &d.body else { return };
                match m {
                    Message::FusedRecord(r) => self.uplink(&r.patient_id, t.since(d.sent_at)),
                    Message::SessionRecord(r) => self.uplink(&r.patient_id, t.since(d.sent_at)),
                    Message::EmergencyAlert(a) => {
                        let acc = self.patients.entry(a.patient_id.clone()).or_default();
                        acc.uplinks += 1;
                        acc.latency_sum += t.since(d.sent_at);
                        acc.alert_latencies.push(t.since(a.created_at));
                        self.global.alerts += 1;
                    }
                    _ => {}
                }
            }
            Event::Notify(n) => self.notice(t, n),
            _ => {}
        }
    }

    fn uplink(&mut self, patient_id: &str, latency: u64) {
        let acc = self.patients.entry(patient_id.to_string()).or_default();
        acc.uplinks += 1;
        acc.latency_sum += latency;
    }

    fn notice(&mut self, t: SimTime, n: &Notice) {
        match n {
            Notice::RunStarted {
                seed,
                duration_ms,
                qoe,
                patients,
            } => {
                self.seed = *seed;
                self.duration_ms = *duration_ms;
                self.qoe = *qoe;
                for p in patients {
                    self.patients.entry(p.patient_id.clone()).or_default().timeline.push(StagePoint { t, stage: p.stage });
                }
            }
            Notice::Plan { plan } => {
                for (id, demand) in &plan.demands {
                    let got = plan.allocations.get(id).map_or(0.0, |a| a.bandwidth_kbps);
                    let sat = if demand.bandwidth_kbps > 0.0 {
                        (got / demand.bandwidth_kbps).min(1.0)
                    } else {
                        1.0
                    };
                    self.patients.entry(id.clone()).or_default().satisfaction.push(sat);
                }
            }
            Notice::Feedback { record } => self.global.epochs.push(EpochMetrics {
                epoch_index: record.epoch_index,
                start: record.start,
                end: record.end,
                total_utilization: record.total_utilization,
                utilization: record.utilization.clone(),
            }),
            Notice::StageChanged { patient_id, to, .. } => {
                self.global.stage_changes += 1;
                self.patients
                    .entry(patient_id.clone())
                    .or_default()
                    .timeline
                    .push(StagePoint { t, stage: *to });
            }
            Notice::SessionClosed { record } => {
                let s = &mut self.patients.entry(record.patient_id.clone()).or_default().sessions;
                match record.outcome {
                    SessionOutcome::Success => s.success += 1,
                    SessionOutcome::Failure => s.failure += 1,
                }
            }
            Notice::Offload { task, decision, .. } => match decision.placement {
                Placement::Local => self.global.compute_units_local += task.cycles,
                Placement::Cloud => self.global.compute_units_cloud += task.cycles,
            },
            Notice::CacheAccess { access, .. } => {
                self.global.bytes_moved += access.delivery_cost_bytes;
                match access.outcome {
                    CacheOutcome::Hit => self.global.cache_hits += 1,
                    CacheOutcome::Miss => self.global.cache_misses += 1,
                }
            }
            _ => {}
        }
    }

    pub fn finish(&self) -> RunMetrics {
        let mut global = self.global.clone();
        let accesses = global.cache_hits + global.cache_misses;
        global.cache_hit_ratio = if accesses == 0 {
            0.0
        } else {
            global.cache_hits as f64 / accesses as f64
        };
        let patients = self
            .patients
            .iter()
            .map(|(id, a)| {
                let mean_latency = if a.uplinks == 0 {
                    0.0
                } else {
                    a.latency_sum as f64 / a.uplinks as f64
                };
                let sat = if a.satisfaction.is_empty() {
                    1.0
                } else {
                    a.satisfaction.iter().sum::<f64>() / a.satisfaction.len() as f64
                };
                (
                    id.clone(),
                    PatientMetrics {
                        uplink_messages: a.uplinks,
                        mean_uplink_latency_ms: mean_latency,
                        alert_latencies_ms: a.alert_latencies.clone(),
                        bandwidth_satisfaction: sat,
                        qoe: qoe(&self.qoe, sat, mean_latency),
                        stage_timeline: a.timeline.clone(),
                        sessions: a.sessions.clone(),
                    },
                )
            })
            .collect();
        RunMetrics {
            seed: self.seed,
            duration_ms: self.duration_ms,
            qoe_params: self.qoe,
            patients,
            global,
        }
    }
}
