use std::collections::BTreeMap;
use std::io::Write;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;

use super::config::ScenarioConfig;
use super::event::{Event, Notice, EXPERT};
use super::metrics::RunMetrics;
use super::run::{finish, prepare, RunError, RunOutput};
use super::world::World;
use crate::cloud_services::CloudError;
use crate::protocol::{
    EmergencyAlert, ExpertRecommendation, FusedRecord, RiskAssessment, TherapyStage,
};
use crate::sim_kernel::{Inbox, Kernel, KernelError, SimTime};

/// Per-patient status as shown on the dashboard.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatientStatus {
    pub patient_id: String,
    pub robot_id: String,
    pub stage: TherapyStage,
    pub tree_id: String,
    pub risk: RiskAssessment,
    pub sessions: usize,
    /// Mean positive-response fraction over closed sessions.
    pub engagement_proxy: f64,
    pub open_session: Option<String>,
}

/// Read-only view of a live run, republished as the run advances.
#[derive(Debug, Clone, Serialize)]
pub struct Snapshot {
    pub t: SimTime,
    pub finished: bool,
    pub patients: Vec<PatientStatus>,
    #[serde(skip)]
    pub telemetry: BTreeMap<String, Vec<FusedRecord>>,
    pub alerts: Vec<EmergencyAlert>,
    pub metrics: RunMetrics,
}

impl Snapshot {
    pub fn of(world: &World, t: SimTime, finished: bool) -> Snapshot {
        let mut patients = Vec::new();
        let mut telemetry = BTreeMap::new();
        let mut alerts = Vec::new();
        for (pid, ps) in &world.patients {
            let Ok(d) = world.cloud.dossier(pid) else { continue };
            patients.push(PatientStatus {
                patient_id: pid.clone(),
                robot_id: ps.robot.robot_id.clone(),
                stage: ps.robot.stage(),
                tree_id: ps.robot.active_command.tree_id.clone(),
                risk: d.risk.clone(),
                sessions: d.sessions.len(),
                engagement_proxy: if d.sessions.is_empty() {
                    0.0
                } else {
                    d.sessions.iter().map(|s| s.positive_fraction).sum::<f64>() / d.sessions.len() as f64
                },
                open_session: ps.robot.open_session.as_ref().map(|s| s.session_id.clone()),
            });
            telemetry.insert(pid.clone(), d.records.iter().cloned().collect());
            alerts.extend(d.outstanding_alerts.values().cloned());
        }
        Snapshot {
            t,
            finished,
            patients,
            telemetry,
            alerts,
            metrics: world.metrics.finish(),
        }
    }

    /// Fused records whose window ends within the last `window_ms`.
    pub fn telemetry_since(&self, patient_id: &str, window_ms: u64) -> Option<Vec<&FusedRecord>> {
        let from = self.t.millis().saturating_sub(window_ms);
        self.telemetry
            .get(patient_id)
            .map(|rs| rs.iter().filter(|r| r.window.t1.millis() > from).collect())
    }
}

/// Callbacks from a paced run.
pub trait LiveHooks {
    fn publish(&mut self, snapshot: Arc<Snapshot>);
    fn notice(&mut self, t: SimTime, seq: u64, notice: &Notice);
    fn resolved(&mut self, ticket: u64, result: Result<(), CloudError>);
}

/// Handle for submitting expert recommendations into a running simulation.
#[derive(Clone)]
pub struct Submitter {
    inbox: Inbox<Event>,
}

impl Submitter {
    pub fn submit(&self, recommendation: ExpertRecommendation, ticket: u64) {
        self.inbox.push(EXPERT, Event::Submit { recommendation }, ticket);
    }
}

/// A run driven step by step, accepting injected recommendations between steps.
pub struct LiveRun {
    kernel: Kernel<Event>,
    world: World,
    inbox: Inbox<Event>,
    /// Submit seq to ticket, until the cloud routes it.
    pending: BTreeMap<u64, u64>,
    resolved: Vec<(u64, Result<(), CloudError>)>,
}

impl LiveRun {
    pub fn new(cfg: &ScenarioConfig, trace: Option<Box<dyn Write + Send>>) -> Result<LiveRun, RunError> {
        let (kernel, mut world) = prepare(cfg, trace)?;
        world.collect_notices = true;
        Ok(LiveRun {
            kernel,
            world,
            inbox: Inbox::new(),
            pending: BTreeMap::new(),
            resolved: Vec::new(),
        })
    }

    pub fn submitter(&self) -> Submitter {
        Submitter {
            inbox: self.inbox.clone(),
        }
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn now(&self) -> SimTime {
        self.kernel.now()
    }

    pub fn last_seq(&self) -> Option<u64> {
        self.kernel.last_seq()
    }

    pub fn next_seq(&self) -> u64 {
        self.kernel.next_seq()
    }

    pub fn next_time(&self) -> Option<SimTime> {
        self.kernel.peek_time()
    }

    /// Schedule everything waiting in the inbox; returns `(ticket, seq)` pairs.
    pub fn drain_inbox(&mut self) -> Vec<(u64, u64)> {
        let assigned = self.kernel.drain_inbox(&self.inbox);
        for &(ticket, seq) in &assigned {
            self.pending.insert(seq, ticket);
        }
        assigned
    }

    /// Process one event at or before the horizon. Returns false once nothing is left.
    pub fn step(&mut self) -> Result<bool, KernelError> {
        let horizon = self.world.horizon();
        let stepped = self.kernel.step(horizon, &mut self.world)?;
        if !self.pending.is_empty() {
            let done: Vec<u64> = self
                .pending
                .keys()
                .filter(|s| self.world.route_results.contains_key(s))
                .copied()
                .collect();
            for seq in done {
                let ticket = self.pending.remove(&seq).expect("listed");
                self.resolved.push((ticket, self.world.route_results[&seq].clone()));
            }
        }
        Ok(stepped)
    }

    /// Notices processed since the last call.
    pub fn take_notices(&mut self) -> Vec<(SimTime, u64, Notice)> {
        std::mem::take(&mut self.world.collected)
    }

    /// Ticket outcomes resolved since the last call.
    pub fn take_resolved(&mut self) -> Vec<(u64, Result<(), CloudError>)> {
        std::mem::take(&mut self.resolved)
    }

    pub fn snapshot(&self, finished: bool) -> Snapshot {
        Snapshot::of(&self.world, self.kernel.now(), finished)
    }

    /// Write the trailer and return the run's output. Further steps do nothing.
    pub fn finish(&mut self) -> Result<RunOutput, RunError> {
        finish(&mut self.kernel, &mut self.world)
    }

    /// Run with virtual time advancing `pace` times faster than wall-clock time.
    ///
    /// Stops early, still writing the trailer, when `stop` is set.
    pub fn run_paced(mut self, pace: f64, hooks: &mut dyn LiveHooks, stop: &AtomicBool) -> Result<RunOutput, RunError> {
        let start = Instant::now();
        let horizon = self.world.horizon();
        let mut last_publish = SimTime::ZERO;
        hooks.publish(Arc::new(self.snapshot(false)));
        while !stop.load(Ordering::Relaxed) {
            self.drain_inbox();
            let Some(next) = self.kernel.peek_time().filter(|t| *t <= horizon) else {
                break;
            };
            let due = start + Duration::from_secs_f64(next.millis() as f64 / 1000.0 / pace);
            let wall = Instant::now();
            if due > wall {
                std::thread::sleep((due - wall).min(Duration::from_millis(5)));
                continue;
            }
            let prev = self.kernel.now();
            self.step()?;
            let notices = self.take_notices();
            for (t, seq, n) in &notices {
                hooks.notice(*t, *seq, n);
            }
            for (ticket, r) in self.take_resolved() {
                hooks.resolved(ticket, r);
            }
            let now = self.kernel.now();
            if !notices.is_empty() || (now > prev && now.since(last_publish) >= 1000) {
                hooks.publish(Arc::new(self.snapshot(false)));
                last_publish = now;
            }
        }
        if stop.load(Ordering::Relaxed) {
            // Cut the horizon short so the trailer lands at the stop time.
            let now = self.kernel.now();
            self.world.cfg.duration_ms = now.millis();
        }
        let out = self.finish()?;
        for (t, seq, n) in self.take_notices() {
            hooks.notice(t, seq, &n);
        }
        hooks.publish(Arc::new(self.snapshot(true)));
        Ok(out)
    }
}
