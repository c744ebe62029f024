//! The edge robot: sensor fusion, emergency monitoring, therapy sessions and uplink.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behavior_tree::{
    tick, ActionResult, ActionSpec, Blackboard, BtError, NodeDef, Responder, Status, TickContext,
    TreeCatalog, TreeDef,
};
use crate::protocol::{
    AlertCause, Direction, EmergencyAlert, FusedRecord, InteractionEvent, Message, NetworkInfo,
    PatientResponse, PhysicalBounds, RiskLevel, SensorFrame, SensorKind, SessionOutcome,
    SessionRecord, StatSummary, TherapyCommand, TherapyStage, Window,
};
use crate::sim_kernel::SimTime;

pub const DEFAULT_FUSION_WINDOW_MS: u64 = 10_000;
pub const DEFAULT_BEAT_MS: u64 = 5_000;
pub const DEFAULT_MAX_RETRIES: u32 = 3;

#[derive(Debug, Error, PartialEq)]
pub enum EdgeError {
    #[error("frame from {sensor_id} at {t} lies outside window [{t0}, {t1})")]
    OutOfWindowFrame {
        sensor_id: String,
        t: SimTime,
        t0: SimTime,
        t1: SimTime,
    },
    #[error("interaction at {t} lies outside window [{t0}, {t1})")]
    OutOfWindowInteraction { t: SimTime, t0: SimTime, t1: SimTime },
    #[error("robot {0} has no open session")]
    NoActiveSession(String),
    #[error("robot {0} already has an open session")]
    SessionAlreadyOpen(String),
    #[error("tree {tree_id} is not a {stage} tree")]
    StageTreeMismatch { stage: TherapyStage, tree_id: String },
    #[error("command for {got} sent to robot of {expected}")]
    WrongPatient { expected: String, got: String },
    #[error("session runs {expected}, got tree {got}")]
    WrongTree { expected: String, got: String },
    #[error(transparent)]
    Tree(#[from] BtError),
}

/// Summarize a window of frames and interactions into one record.
pub fn fuse(
    patient_id: &str,
    robot_id: &str,
    frames: &[SensorFrame],
    interactions: &[InteractionEvent],
    network_info: NetworkInfo,
    window: Window,
) -> Result<FusedRecord, EdgeError> {
    let mut by_kind: BTreeMap<SensorKind, Vec<f64>> = BTreeMap::new();
    for f in frames {
        if !window.contains(f.t) {
            return Err(EdgeError::OutOfWindowFrame {
                sensor_id: f.sensor_id.clone(),
                t: f.t,
                t0: window.t0,
                t1: window.t1,
            });
        }
        by_kind.entry(f.kind).or_default().push(f.value);
    }
    if let Some(e) = interactions.iter().find(|e| !window.contains(e.t)) {
        return Err(EdgeError::OutOfWindowInteraction {
            t: e.t,
            t0: window.t0,
            t1: window.t1,
        });
    }
    let summarize = |kinds: &mut dyn Iterator<Item = SensorKind>| -> BTreeMap<SensorKind, StatSummary> {
        kinds
            .map(|k| (k, StatSummary::of(by_kind.get(&k).map(Vec::as_slice).unwrap_or(&[]))))
            .collect()
    };
    let mut interactions = interactions.to_vec();
    interactions.sort_by_key(|e| e.t);
    Ok(FusedRecord {
        patient_id: patient_id.to_string(),
        robot_id: robot_id.to_string(),
        window,
        vitals: summarize(&mut SensorKind::medical()),
        ambient: summarize(&mut SensorKind::ambient()),
        interactions,
        network_info,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmergencyRule {
    pub kind: SensorKind,
    #[serde(default)]
    pub lower: Option<f64>,
    #[serde(default)]
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmergencyRuleSet(pub Vec<EmergencyRule>);

impl Default for EmergencyRuleSet {
    fn default() -> Self {
        use SensorKind::*;
        let r = |kind, lower, upper| EmergencyRule { kind, lower, upper };
        EmergencyRuleSet(vec![
            r(SpO2, Some(90.0), None),
            r(Heartbeat, Some(50.0), Some(120.0)),
            r(SystolicPressure, Some(80.0), Some(180.0)),
            r(BodyTemp, Some(35.0), Some(39.5)),
        ])
    }
}

impl EmergencyRuleSet {
    pub fn check(&self, bounds: &PhysicalBounds) -> Result<(), String> {
        for rule in &self.0 {
            let b = bounds.get(rule.kind);
            for v in [rule.lower, rule.upper].into_iter().flatten() {
                if !b.contains(v) {
                    return Err(format!("{} rule bound {v} lies outside {b}", rule.kind.as_str()));
                }
            }
        }
        for kind in [SensorKind::SpO2, SensorKind::Heartbeat] {
            if !self.0.iter().any(|r| r.kind == kind) {
                return Err(format!("rules must cover {}", kind.as_str()));
            }
        }
        Ok(())
    }
}

/// The first rule `frame` strictly violates, if any.
pub fn violated_rule(frame: &SensorFrame, rules: &EmergencyRuleSet) -> Option<AlertCause> {
    rules.0.iter().filter(|r| r.kind == frame.kind).find_map(|r| {
        let cause = |threshold, direction| AlertCause {
            kind: frame.kind,
            value: frame.value,
            threshold,
            direction,
        };
        match (r.lower, r.upper) {
            (Some(lo), _) if frame.value < lo => Some(cause(lo, Direction::Below)),
            (_, Some(hi)) if frame.value > hi => Some(cause(hi, Direction::Above)),
            _ => None,
        }
    })
}

/// Alert for `frame` if it breaks a rule. Pure; see [`EmergencyMonitor`] for debouncing.
pub fn monitor(frame: &SensorFrame, rules: &EmergencyRuleSet) -> Option<EmergencyAlert> {
    violated_rule(frame, rules).map(|cause| EmergencyAlert {
        alert_id: format!("{}#{}", frame.sensor_id, frame.seq),
        patient_id: frame.patient_id.clone(),
        cause,
        created_at: frame.t,
        priority: RiskLevel::Critical,
    })
}

/// Edge-triggered alerting: one alert per excursion per kind, re-armed once back in range.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmergencyMonitor {
    tripped: BTreeMap<SensorKind, bool>,
}

impl EmergencyMonitor {
    pub fn observe(&mut self, frame: &SensorFrame, rules: &EmergencyRuleSet) -> Option<EmergencyAlert> {
        let alert = monitor(frame, rules);
        let tripped = self.tripped.entry(frame.kind).or_default();
        let fire = alert.is_some() && !*tripped;
        *tripped = alert.is_some();
        if fire {
            alert
        } else {
            None
        }
    }
}

/// Patient-side behavior for a session: at most one robot action per beat, with
/// a bounded number of re-prompts on silence.
pub struct TherapyResponder<F> {
    stage: TherapyStage,
    max_retries: u32,
    acted: bool,
    respond: F,
}

impl<F: FnMut(TherapyStage, &ActionSpec) -> PatientResponse> TherapyResponder<F> {
    pub fn new(stage: TherapyStage, max_retries: u32, respond: F) -> Self {
        TherapyResponder {
            stage,
            max_retries,
            acted: false,
            respond,
        }
    }
}

impl<F: FnMut(TherapyStage, &ActionSpec) -> PatientResponse> Responder for TherapyResponder<F> {
    fn action(&mut self, node: &NodeDef, spec: &ActionSpec, bb: &mut Blackboard) -> ActionResult {
        if self.acted {
            return ActionResult::Deferred;
        }
        self.acted = true;
        let response = (self.respond)(self.stage, spec);
        let status = match response {
            r if r.is_positive() => Status::Success,
            PatientResponse::Withdrawal => Status::Failure,
            _ => {
                let tries = bb.retries.get(&node.name).copied().unwrap_or(0) + 1;
                if tries > self.max_retries {
                    Status::Failure
                } else {
                    bb.retries.insert(node.name.clone(), tries);
                    Status::Running
                }
            }
        };
        if status != Status::Running {
            bb.retries.remove(&node.name);
        }
        ActionResult::Performed { status, response }
    }

    fn condition(&mut self, _node: &NodeDef, spec: &ActionSpec, bb: &Blackboard) -> Status {
        if spec.accepts(bb.last_response) {
            Status::Success
        } else {
            Status::Failure
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenSession {
    pub session_id: String,
    pub tree_id: String,
    pub stage: TherapyStage,
    pub blackboard: Blackboard,
    pub started_at: SimTime,
    pub steps: u64,
    pub event_count: u64,
    pub positive_responses: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub status: Status,
    pub events: Vec<InteractionEvent>,
    pub record: Option<SessionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub robot_id: String,
    pub patient_id: String,
    pub active_command: TherapyCommand,
    /// Received mid-session; becomes active at the next session boundary.
    pub pending_command: Option<TherapyCommand>,
    pub open_session: Option<OpenSession>,
    pub fusion_window_ms: u64,
    pub beat_ms: u64,
    pub sessions_started: u64,
    pub window_start: SimTime,
    pub frames: Vec<SensorFrame>,
    pub interactions: Vec<InteractionEvent>,
    pub uplink_buffer: Vec<Message>,
    /// Bytes sent since the last FusedRecord was built.
    pub bytes_sent: u64,
    /// Used when the active command carries no `max_retries` parameter.
    pub default_max_retries: u32,
}

impl RobotState {
    pub fn new(robot_id: impl Into<String>, command: TherapyCommand, fusion_window_ms: u64, beat_ms: u64) -> Self {
        RobotState {
            robot_id: robot_id.into(),
            patient_id: command.patient_id.clone(),
            active_command: command,
            pending_command: None,
            open_session: None,
            fusion_window_ms,
            beat_ms,
            sessions_started: 0,
            window_start: SimTime::ZERO,
            frames: Vec::new(),
            interactions: Vec::new(),
            uplink_buffer: Vec::new(),
            bytes_sent: 0,
            default_max_retries: DEFAULT_MAX_RETRIES,
        }
    }

    pub fn stage(&self) -> TherapyStage {
        self.active_command.stage
    }

    pub fn max_retries(&self) -> u32 {
        self.active_command
            .session_params
            .get("max_retries")
            .and_then(|v| v.parse().ok())
            .unwrap_or(self.default_max_retries)
    }

    /// Replace the therapy command now if idle, otherwise at the next session boundary.
    pub fn apply_update(&mut self, cmd: TherapyCommand, catalog: &TreeCatalog) -> Result<(), EdgeError> {
        if cmd.patient_id != self.patient_id {
            return Err(EdgeError::WrongPatient {
                expected: self.patient_id.clone(),
                got: cmd.patient_id,
            });
        }
        let tree = catalog.get(&cmd.tree_id)?;
        if tree.stage != cmd.stage {
            return Err(EdgeError::StageTreeMismatch {
                stage: cmd.stage,
                tree_id: cmd.tree_id,
            });
        }
        if self.open_session.is_some() {
            self.pending_command = Some(cmd);
        } else {
            self.active_command = cmd;
        }
        Ok(())
    }

    pub fn start_session(&mut self, now: SimTime) -> Result<&OpenSession, EdgeError> {
        if self.open_session.is_some() {
            return Err(EdgeError::SessionAlreadyOpen(self.robot_id.clone()));
        }
        self.sessions_started += 1;
        Ok(self.open_session.insert(OpenSession {
            session_id: format!("{}:s{}", self.robot_id, self.sessions_started),
            tree_id: self.active_command.tree_id.clone(),
            stage: self.active_command.stage,
            blackboard: Blackboard::new(),
            started_at: now,
            steps: 0,
            event_count: 0,
            positive_responses: 0,
        }))
    }

    /// One beat of the open session. Closes it on Success or Failure.
    pub fn run_session_step<F>(
        &mut self,
        tree: &TreeDef,
        respond: F,
        now: SimTime,
    ) -> Result<StepResult, EdgeError>
    where
        F: FnMut(TherapyStage, &ActionSpec) -> PatientResponse,
    {
        let max_retries = self.max_retries();
        let session = self
            .open_session
            .as_mut()
            .ok_or_else(|| EdgeError::NoActiveSession(self.robot_id.clone()))?;
        if session.tree_id != tree.tree_id {
            return Err(EdgeError::WrongTree {
                expected: session.tree_id.clone(),
                got: tree.tree_id.clone(),
            });
        }
        let mut responder = TherapyResponder::new(session.stage, max_retries, respond);
        let ctx = TickContext {
            session_id: session.session_id.clone(),
            t: now,
        };
        let outcome = tick(tree, &mut session.blackboard, &mut responder, &ctx)?;
        session.steps += 1;
        session.event_count += outcome.events.len() as u64;
        session.positive_responses += outcome
            .events
            .iter()
            .filter(|e| e.patient_response.is_positive())
            .count() as u64;
        self.interactions.extend(outcome.events.iter().cloned());

        let record = match outcome.status {
            Status::Running => None,
            done => {
                let s = self.open_session.take().expect("open");
                if let Some(cmd) = self.pending_command.take() {
                    self.active_command = cmd;
                }
                let record = SessionRecord {
                    session_id: s.session_id,
                    robot_id: self.robot_id.clone(),
                    patient_id: self.patient_id.clone(),
                    tree_id: s.tree_id,
                    stage: s.stage,
                    outcome: if done == Status::Success {
                        SessionOutcome::Success
                    } else {
                        SessionOutcome::Failure
                    },
                    steps: s.steps,
                    event_count: s.event_count,
                    positive_responses: s.positive_responses,
                    started_at: s.started_at,
                    duration_ms: s.steps * self.beat_ms,
                };
                self.uplink_buffer.push(Message::SessionRecord(record.clone()));
                Some(record)
            }
        };
        Ok(StepResult {
            status: outcome.status,
            events: outcome.events,
            record,
        })
    }

    pub fn record_frame(&mut self, frame: SensorFrame) {
        self.frames.push(frame);
    }

    /// Account for bytes sent outside the buffered uplink, e.g. alerts.
    pub fn note_sent(&mut self, bytes: u64) {
        self.bytes_sent += bytes;
    }

    /// Fuse the window ending at `t1` and queue the record for uplink.
    pub fn close_window(&mut self, t1: SimTime, network_type: &str, communication_quality: f64) -> Result<FusedRecord, EdgeError> {
        let window = Window::new(self.window_start, t1);
        let net = NetworkInfo {
            network_type: network_type.to_string(),
            service_data_flow_bytes: self.bytes_sent,
            communication_quality,
        };
        // Anything stamped at or after t1 belongs to the next window.
        let (frames, later_frames): (Vec<_>, Vec<_>) = self.frames.drain(..).partition(|f| f.t < t1);
        let (events, later_events): (Vec<_>, Vec<_>) = self.interactions.drain(..).partition(|e| e.t < t1);
        self.frames = later_frames;
        self.interactions = later_events;
        let record = fuse(&self.patient_id, &self.robot_id, &frames, &events, net, window)?;
        self.bytes_sent = 0;
        self.window_start = t1;
        self.uplink_buffer.push(Message::FusedRecord(record.clone()));
        Ok(record)
    }

    /// Drain the uplink buffer in order, counting the bytes toward the next record.
    pub fn uplink_flush(&mut self) -> Vec<(Message, u64)> {
        let out: Vec<(Message, u64)> = self
            .uplink_buffer
            .drain(..)
            .map(|m| {
                let size = m.wire_size();
                (m, size)
            })
            .collect();
        self.bytes_sent += out.iter().map(|(_, s)| s).sum::<u64>();
        out
    }
}

#[cfg(test)]
mod tests;
