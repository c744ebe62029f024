use std::collections::{BTreeMap, BTreeSet};

use super::config::{ConfigError, ScenarioConfig};
use super::event::{robot_node, Carried, Delivery, Event, Notice, RosterEntry, CLOUD, EXPERT, GATEWAY};
use super::metrics::MetricsBuilder;
use crate::behavior_tree::TreeCatalog;
use crate::cloud_services::{
    handover, offload_decision, CloudError, CognitiveDataServer, EdgeCandidate, OffloadTask,
    ResourceManager, RiskUpdate, Routed,
};
use crate::edge_robot::{EmergencyMonitor, RobotState};
use crate::iot_sensors::SensorStream;
use crate::patient_and_expert_models::{
    expert_step, AdvanceSignal, DossierView, ExpertPolicy, PatientModel, PendingAlert,
};
use crate::protocol::{
    Message, Recommendation, ResourceVector, RiskLevel, SensorKind, TherapyCommand, Validate,
    ValidationContext,
};
use crate::sim_kernel::{Handler, Kernel, KernelError, LinkModel, RunSeed, SimEvent, SimTime, StreamRng};

type Step = Result<(), String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn kerr(e: KernelError) -> String {
    e.to_string()
}

/// One patient with their robot, sensors and behavioral model.
pub struct PatientSim {
    pub robot: RobotState,
    pub model: PatientModel,
    pub link: LinkModel,
    rng: StreamRng,
    sensors: BTreeMap<SensorKind, (SensorStream, StreamRng)>,
    monitor: EmergencyMonitor,
    windows: u64,
}

pub struct ExpertNode {
    pub policy: ExpertPolicy,
    pub views: BTreeMap<String, DossierView>,
    deferred: BTreeMap<String, Vec<AdvanceSignal>>,
    poll_at: BTreeMap<String, SimTime>,
}

/// All node state of a run; the kernel's single event handler.
pub struct World {
    pub cfg: ScenarioConfig,
    pub catalog: TreeCatalog,
    pub vctx: ValidationContext,
    pub patients: BTreeMap<String, PatientSim>,
    robots: BTreeMap<String, String>,
    demands: BTreeMap<String, ResourceVector>,
    pub cloud: CognitiveDataServer,
    pub resources: ResourceManager,
    pub expert: ExpertNode,
    pub metrics: MetricsBuilder,
    /// Routing outcome per `Submit` seq.
    pub route_results: BTreeMap<u64, Result<(), CloudError>>,
    /// Notices processed since the last drain; only filled when `collect_notices` is set.
    pub collected: Vec<(SimTime, u64, Notice)>,
    pub collect_notices: bool,
}

fn notify(k: &mut Kernel<Event>, n: Notice) -> Step {
    k.schedule(k.now(), GATEWAY, Event::Notify(n)).map(|_| ()).map_err(kerr)
}

fn send(k: &mut Kernel<Event>, from: &str, to: &str, body: Carried, ref_seq: Option<u64>) -> Result<u64, String> {
    let size = body.wire_size();
    let d = Delivery {
        from: from.to_string(),
        sent_at: k.now(),
        size,
        ref_seq,
        body,
    };
    k.deliver(from, to, size, Event::Deliver(d)).map_err(kerr)?;
    Ok(size)
}

impl World {
    pub fn new(cfg: ScenarioConfig) -> Result<World, ConfigError> {
        cfg.validate()?;
        let catalog = cfg.catalog()?;
        let vctx = ValidationContext {
            bounds: cfg.bounds(),
            risk_thresholds: cfg.cloud.risk.thresholds,
            catalog: catalog.stage_map(),
        };
        let mut cloud = CognitiveDataServer::new(cfg.cloud.risk.clone(), cfg.expert.progression(), cfg.cloud.history_depth);
        let mut patients = BTreeMap::new();
        let mut robots = BTreeMap::new();
        let mut demands = BTreeMap::new();
        let mut views = BTreeMap::new();
        let bounds = cfg.bounds();
        for p in &cfg.patients {
            let pid = p.patient_id.clone();
            let robot_id = p.robot_id();
            let command = TherapyCommand::new(&pid, p.stage, p.tree());
            let scripts: Vec<_> = cfg
                .sensors
                .anomalies
                .iter()
                .filter(|a| a.patient_id == pid)
                .map(|a| a.script())
                .collect();
            let sensors = cfg
                .profiles_for(p)
                .into_values()
                .map(|profile| {
                    let kind = profile.kind;
                    let stream = SensorStream::new(&pid, profile, scripts.clone(), &bounds);
                    let rng = RunSeed::new(cfg.seed, &stream.sensor_id).rng();
                    (kind, (stream, rng))
                })
                .collect();
            let mut robot = RobotState::new(&robot_id, command, cfg.edge.fusion_window_ms, cfg.edge.beat_ms);
            robot.default_max_retries = cfg.edge.max_retries;
            patients.insert(
                pid.clone(),
                PatientSim {
                    robot,
                    model: PatientModel::new(&pid, p.stage, p.engagement, p.cooperation_bias),
                    link: cfg.links.edge_cloud.model("edge-cloud"),
                    rng: RunSeed::new(cfg.seed, &format!("patient:{pid}")).rng(),
                    sensors,
                    monitor: EmergencyMonitor::default(),
                    windows: 0,
                },
            );
            cloud.register(&pid, &robot_id, p.stage);
            robots.insert(robot_id, pid.clone());
            demands.insert(pid.clone(), cfg.demand_for(p));
            views.insert(
                pid.clone(),
                DossierView {
                    patient_id: pid.clone(),
                    stage: p.stage,
                    risk: RiskLevel::Low,
                    alerts: Vec::new(),
                },
            );
        }
        let x = &cfg.expert;
        let expert = ExpertNode {
            policy: ExpertPolicy {
                expert_id: x.expert_id.clone(),
                mode: x.mode,
                ack_delay_ms: if x.live { x.live_ack_timeout_ms } else { x.ack_delay_ms },
                live: x.live,
            },
            views,
            deferred: BTreeMap::new(),
            poll_at: BTreeMap::new(),
        };
        Ok(World {
            resources: ResourceManager::new(cfg.cloud.capacities, cfg.cloud.epoch_ms, cfg.cloud.cache_capacity_bytes),
            catalog,
            vctx,
            patients,
            robots,
            demands,
            cloud,
            expert,
            metrics: MetricsBuilder::new(),
            route_results: BTreeMap::new(),
            collected: Vec::new(),
            collect_notices: false,
            cfg,
        })
    }

    pub fn horizon(&self) -> SimTime {
        SimTime(self.cfg.duration_ms)
    }

    /// Wire links and queue the initial events at t = 0.
    pub fn bootstrap(&mut self, k: &mut Kernel<Event>) -> Result<(), KernelError> {
        let roster = self
            .cfg
            .patients
            .iter()
            .map(|p| RosterEntry {
                patient_id: p.patient_id.clone(),
                robot_id: p.robot_id(),
                stage: p.stage,
                tree_id: p.tree(),
                demand: self.demands[&p.patient_id],
            })
            .collect();
        let start = Notice::RunStarted {
            seed: self.cfg.seed,
            duration_ms: self.cfg.duration_ms,
            qoe: self.cfg.metrics,
            patients: roster,
        };
        k.schedule(k.now(), GATEWAY, Event::Notify(start))?;

        let mut attached: BTreeMap<String, u64> = BTreeMap::new();
        for (pid, ps) in self.patients.iter_mut() {
            let aps = &self.cfg.edge.access_points;
            if !aps.is_empty() {
                let candidates: Vec<EdgeCandidate> = aps
                    .iter()
                    .map(|ap| EdgeCandidate {
                        queue_length: ap.queue_length + attached.get(&ap.node_id).copied().unwrap_or(0),
                        ..ap.clone()
                    })
                    .collect();
                let chosen = handover(&ps.robot.robot_id, &candidates, self.cfg.cloud.load_penalty_ms)
                    .expect("candidates are non-empty")
                    .clone();
                *attached.entry(chosen.node_id.clone()).or_default() += 1;
                ps.link.latency_ms = chosen.latency_ms;
                let n = Notice::Handover {
                    patient_id: pid.clone(),
                    cost_ms: chosen.cost(self.cfg.cloud.load_penalty_ms),
                    node_id: chosen.node_id,
                };
                k.schedule(k.now(), GATEWAY, Event::Notify(n))?;
            }
            k.connect_duplex(&ps.robot.robot_id, CLOUD, ps.link.clone())?;
        }
        k.connect_duplex(EXPERT, CLOUD, self.cfg.links.expert_cloud.model("expert-cloud"))?;

        let plan = self
            .resources
            .begin_epoch(k.now(), &self.demands, &self.cloud.risk_levels())
            .clone();
        k.schedule(k.now(), GATEWAY, Event::Notify(Notice::Plan { plan }))?;

        let dur = self.cfg.duration_ms;
        for (pid, ps) in &self.patients {
            let robot = ps.robot.robot_id.clone();
            for (kind, (stream, _)) in &ps.sensors {
                k.schedule(
                    SimTime::ZERO,
                    stream.sensor_id.clone(),
                    Event::Sample {
                        patient_id: pid.clone(),
                        sensor: *kind,
                    },
                )?;
            }
            if self.cfg.edge.fusion_window_ms <= dur {
                k.schedule(SimTime(self.cfg.edge.fusion_window_ms), robot.clone(), Event::WindowEnd { patient_id: pid.clone() })?;
            }
            if self.cfg.edge.first_session_ms < dur {
                k.schedule(SimTime(self.cfg.edge.first_session_ms), robot, Event::SessionStart { patient_id: pid.clone() })?;
            }
        }
        k.schedule(SimTime(self.cfg.cloud.epoch_ms.min(dur)), CLOUD, Event::EpochEnd {})?;
        Ok(())
    }

    fn patient(&mut self, pid: &str) -> Result<&mut PatientSim, String> {
        self.patients.get_mut(pid).ok_or_else(|| format!("unknown patient {pid}"))
    }

    fn sample(&mut self, k: &mut Kernel<Event>, pid: &str, kind: SensorKind) -> Step {
        let now = k.now();
        let dur = self.cfg.duration_ms;
        let rules = self.cfg.edge.emergency_rules.clone();
        let ps = self.patient(pid)?;
        let (stream, rng) = ps.sensors.get_mut(&kind).ok_or_else(|| format!("no {kind:?} sensor for {pid}"))?;
        let frame = stream.generate_frame(now, rng);
        let period = stream.profile.sample_period_ms;
        let node = stream.sensor_id.clone();
        let alert = ps.monitor.observe(&frame, &rules);
        ps.robot.record_frame(frame);
        if let Some(a) = alert {
            let robot = ps.robot.robot_id.clone();
            let size = send(k, &robot, CLOUD, Carried::Message(Message::EmergencyAlert(a)), None)?;
            ps.robot.note_sent(size);
        }
        if now.millis() + period < dur {
            k.schedule(
                now + period,
                node,
                Event::Sample {
                    patient_id: pid.to_string(),
                    sensor: kind,
                },
            )
            .map_err(kerr)?;
        }
        Ok(())
    }

    fn session_start(&mut self, k: &mut Kernel<Event>, pid: &str) -> Step {
        let now = k.now();
        let asset_size = self.cfg.cloud.asset_size_bytes;
        let ps = self.patient(pid)?;
        let s = ps.robot.start_session(now).map_err(err)?;
        let (session_id, tree_id, stage) = (s.session_id.clone(), s.tree_id.clone(), s.stage);
        let asset_id = format!("tree:{tree_id}");
        let access = self.resources.cache_access(&asset_id, asset_size).map_err(err)?;
        notify(
            k,
            Notice::CacheAccess {
                patient_id: pid.to_string(),
                asset_id,
                access,
            },
        )?;
        notify(
            k,
            Notice::SessionStarted {
                patient_id: pid.to_string(),
                session_id,
                tree_id,
                stage,
            },
        )?;
        self.beat(k, pid)
    }

    fn beat(&mut self, k: &mut Kernel<Event>, pid: &str) -> Step {
        let now = k.now();
        let (beat_ms, gap_ms) = (self.cfg.edge.beat_ms, self.cfg.edge.session_gap_ms);
        let rm = self.cfg.response_model;
        let ps = self.patients.get_mut(pid).ok_or_else(|| format!("unknown patient {pid}"))?;
        let tree_id = match &ps.robot.open_session {
            Some(s) => s.tree_id.clone(),
            None => return Err(format!("beat for {pid} without an open session")),
        };
        let tree = self.catalog.get(&tree_id).map_err(err)?;
        let PatientSim { robot, model, rng, .. } = ps;
        let step = robot
            .run_session_step(tree, |stage, _spec| model.respond(stage, &rm, rng), now)
            .map_err(err)?;
        let node = robot.robot_id.clone();
        match step.record {
            None => {
                k.schedule(now + beat_ms, node, Event::Beat { patient_id: pid.to_string() })
                    .map_err(kerr)?;
            }
            Some(record) => {
                notify(k, Notice::SessionClosed { record })?;
                self.sync_stage(k, pid)?;
                k.schedule(now + beat_ms + gap_ms, node, Event::SessionStart { patient_id: pid.to_string() })
                    .map_err(kerr)?;
            }
        }
        Ok(())
    }

    /// Align the patient's stage with the robot's applied command.
    fn sync_stage(&mut self, k: &mut Kernel<Event>, pid: &str) -> Step {
        let ps = self.patient(pid)?;
        let to = ps.robot.stage();
        if ps.model.stage == to {
            return Ok(());
        }
        let from = ps.model.stage;
        ps.model.stage = to;
        let tree_id = ps.robot.active_command.tree_id.clone();
        notify(
            k,
            Notice::StageChanged {
                patient_id: pid.to_string(),
                from,
                to,
                tree_id,
            },
        )
    }

    fn window_end(&mut self, k: &mut Kernel<Event>, pid: &str) -> Step {
        let now = k.now();
        let cfg = &self.cfg;
        let (net, latency_ref, window_ms, dur) = (
            cfg.edge.network_type.clone(),
            cfg.metrics.latency_ref_ms,
            cfg.edge.fusion_window_ms,
            cfg.duration_ms,
        );
        let (cycles, edge_cap, cloud_cap) = (cfg.edge.analysis_cycles, cfg.edge.compute_capacity, cfg.cloud.compute_capacity);
        let ps = self.patients.get_mut(pid).ok_or_else(|| format!("unknown patient {pid}"))?;
        let quality = (1.0 - ps.link.latency_ms as f64 / latency_ref).clamp(0.0, 1.0);
        let record = ps.robot.close_window(now, &net, quality).map_err(err)?;
        record
            .validate_in(&self.vctx)
            .map_err(|v| format!("invalid fused record: {v:?}"))?;
        ps.windows += 1;
        let robot = ps.robot.robot_id.clone();
        let task = OffloadTask {
            task_id: format!("{robot}:w{}", ps.windows),
            cycles,
            input_bytes: Message::FusedRecord(record).wire_size(),
            origin: robot.clone(),
        };
        let decision = offload_decision(&task, edge_cap, cloud_cap, &ps.link);
        let outgoing = ps.robot.uplink_flush();
        notify(
            k,
            Notice::Offload {
                patient_id: pid.to_string(),
                task,
                decision,
            },
        )?;
        for (m, _) in outgoing {
            send(k, &robot, CLOUD, Carried::Message(m), None)?;
        }
        if now.millis() + window_ms <= dur {
            k.schedule(now + window_ms, robot, Event::WindowEnd { patient_id: pid.to_string() })
                .map_err(kerr)?;
        }
        Ok(())
    }

    fn epoch_end(&mut self, k: &mut Kernel<Event>) -> Step {
        let now = k.now();
        if let Some(record) = self.resources.end_epoch(now) {
            self.cloud.feedback_sync(record.clone());
            notify(k, Notice::Feedback { record })?;
        }
        let dur = self.cfg.duration_ms;
        if now.millis() < dur {
            let plan = self
                .resources
                .begin_epoch(now, &self.demands, &self.cloud.risk_levels())
                .clone();
            let over = plan
                .used
                .components()
                .iter()
                .zip(plan.capacities.components())
                .any(|(u, c)| *u > c * (1.0 + 1e-9) + 1e-9);
            if over {
                return Err(format!("plan for epoch at {now} exceeds capacity"));
            }
            notify(k, Notice::Plan { plan })?;
            k.schedule(SimTime((now.millis() + self.cfg.cloud.epoch_ms).min(dur)), CLOUD, Event::EpochEnd {})
                .map_err(kerr)?;
        }
        Ok(())
    }

    fn risk_update(&mut self, k: &mut Kernel<Event>, u: RiskUpdate) -> Step {
        if !u.changed() {
            return Ok(());
        }
        let assessment = u.assessment.clone();
        notify(
            k,
            Notice::RiskChanged {
                previous: u.previous,
                assessment: u.assessment,
            },
        )?;
        send(k, CLOUD, EXPERT, Carried::Message(Message::RiskAssessment(assessment)), None)?;
        Ok(())
    }

    fn deliver_cloud(&mut self, k: &mut Kernel<Event>, d: Delivery) -> Step {
        let now = k.now();
        let Carried::Message(msg) = d.body else {
            return Err("cloud received a non-message delivery".into());
        };
        match msg {
            Message::FusedRecord(r) => {
                self.resources.record_delivery(&r.patient_id, d.size);
                let u = self.cloud.ingest(r, now).map_err(err)?;
                self.risk_update(k, u)
            }
            Message::SessionRecord(r) => {
                self.resources.record_delivery(&r.patient_id, d.size);
                if let Some(sig) = self.cloud.on_session(&r).map_err(err)? {
                    send(k, CLOUD, EXPERT, Carried::Signal(sig), None)?;
                }
                Ok(())
            }
            Message::EmergencyAlert(a) => {
                self.resources.record_delivery(&a.patient_id, d.size);
                notify(k, Notice::AlertRaised { alert: a.clone() })?;
                let u = self.cloud.on_alert(a.clone(), now).map_err(err)?;
                self.risk_update(k, u)?;
                send(k, CLOUD, EXPERT, Carried::Message(Message::EmergencyAlert(a)), None)?;
                Ok(())
            }
            Message::ExpertRecommendation(rec) => {
                let result = self.cloud.route_recommendation(rec.clone(), &self.vctx, now);
                match &result {
                    Ok(Routed::Command { robot_id, command }) => {
                        send(k, CLOUD, robot_id, Carried::Message(Message::TherapyCommand(command.clone())), None)?;
                        notify(
                            k,
                            Notice::RecommendationApplied {
                                recommendation: rec,
                                command: Some(command.clone()),
                            },
                        )?;
                    }
                    Ok(Routed::AlertCleared { alert_id, risk }) => {
                        notify(
                            k,
                            Notice::AlertCleared {
                                patient_id: rec.patient_id.clone(),
                                alert_id: alert_id.clone(),
                            },
                        )?;
                        notify(
                            k,
                            Notice::RecommendationApplied {
                                recommendation: rec,
                                command: None,
                            },
                        )?;
                        self.risk_update(k, risk.clone())?;
                    }
                    Ok(Routed::Logged) => notify(
                        k,
                        Notice::RecommendationApplied {
                            recommendation: rec,
                            command: None,
                        },
                    )?,
                    Err(e) => notify(
                        k,
                        Notice::RecommendationRejected {
                            recommendation: rec,
                            reason: e.to_string(),
                        },
                    )?,
                }
                if let Some(seq) = d.ref_seq {
                    self.route_results.insert(seq, result.map(|_| ()));
                }
                Ok(())
            }
            other => Err(format!("cloud cannot handle {}", other.type_name())),
        }
    }

    fn deliver_robot(&mut self, k: &mut Kernel<Event>, pid: &str, d: Delivery) -> Step {
        match d.body {
            Carried::Message(Message::TherapyCommand(cmd)) => {
                let ps = self.patients.get_mut(pid).ok_or_else(|| format!("unknown patient {pid}"))?;
                ps.robot.apply_update(cmd, &self.catalog).map_err(err)?;
                self.sync_stage(k, pid)
            }
            _ => Err(format!("robot of {pid} received an unexpected delivery")),
        }
    }

    fn deliver_expert(&mut self, k: &mut Kernel<Event>, d: Delivery) -> Step {
        let now = k.now();
        match d.body {
            Carried::Message(Message::EmergencyAlert(a)) => {
                let view = self.view(&a.patient_id)?;
                view.alerts.push(PendingAlert {
                    alert_id: a.alert_id.clone(),
                    received_at: now,
                });
                k.schedule(now + self.expert.policy.ack_delay_ms, EXPERT, Event::ExpertWake { patient_id: a.patient_id })
                    .map_err(kerr)?;
                Ok(())
            }
            Carried::Message(Message::RiskAssessment(r)) => {
                self.view(&r.patient_id)?.risk = r.level;
                if self.expert.deferred.get(&r.patient_id).is_some_and(|d| !d.is_empty()) {
                    self.expert_step(k, &r.patient_id, Vec::new())?;
                }
                Ok(())
            }
            Carried::Signal(sig) => {
                let pid = sig.patient_id.clone();
                self.expert_step(k, &pid, vec![sig])
            }
            _ => Err("expert received an unexpected delivery".into()),
        }
    }

    fn view(&mut self, pid: &str) -> Result<&mut DossierView, String> {
        self.expert
            .views
            .get_mut(pid)
            .ok_or_else(|| format!("expert has no view of {pid}"))
    }

    fn expert_step(&mut self, k: &mut Kernel<Event>, pid: &str, signals: Vec<AdvanceSignal>) -> Step {
        let now = k.now();
        let mut pending = self.expert.deferred.remove(pid).unwrap_or_default();
        pending.extend(signals);
        let view = self.view(pid)?.clone();
        let out = expert_step(&self.expert.policy, &view, &pending, now);
        for rec in out.recommendations {
            if let Recommendation::EmergencyAck { alert_id } = &rec.recommendation {
                self.view(pid)?.alerts.retain(|a| &a.alert_id != alert_id);
            }
            k.schedule(now + 1, EXPERT, Event::Submit { recommendation: rec })
                .map_err(kerr)?;
        }
        if !out.deferred.is_empty() {
            self.expert.deferred.insert(pid.to_string(), out.deferred);
            if !self.expert.poll_at.contains_key(pid) {
                let at = now + self.cfg.expert.poll_ms;
                self.expert.poll_at.insert(pid.to_string(), at);
                k.schedule(at, EXPERT, Event::ExpertWake { patient_id: pid.to_string() })
                    .map_err(kerr)?;
            }
        }
        Ok(())
    }

    fn submit(&mut self, k: &mut Kernel<Event>, seq: u64, rec: crate::protocol::ExpertRecommendation) -> Step {
        if let Some(view) = self.expert.views.get_mut(&rec.patient_id) {
            match &rec.recommendation {
                Recommendation::TherapyStageChange { target } => view.stage = *target,
                Recommendation::EmergencyAck { alert_id } => view.alerts.retain(|a| &a.alert_id != alert_id),
                _ => {}
            }
        }
        send(k, EXPERT, CLOUD, Carried::Message(Message::ExpertRecommendation(rec)), Some(seq))?;
        Ok(())
    }

    fn check_invariants(&self) -> Step {
        for (pid, ps) in &self.patients {
            if let Some(s) = &ps.robot.open_session {
                if s.stage != ps.robot.stage() {
                    return Err(format!("{pid}: open session stage {} differs from active command", s.stage));
                }
            }
            if ps.model.stage != ps.robot.stage() {
                return Err(format!("{pid}: patient stage drifted from the applied command"));
            }
            if !(0.0..=1.0).contains(&ps.model.engagement) {
                return Err(format!("{pid}: engagement {} left [0,1]", ps.model.engagement));
            }
        }
        if self.resources.cache.used_bytes() > self.resources.cache.capacity_bytes() {
            return Err("edge cache over capacity".into());
        }
        Ok(())
    }

    fn dispatch(&mut self, k: &mut Kernel<Event>, seq: u64, target: &str, event: Event) -> Step {
        match event {
            Event::Sample { patient_id, sensor } => self.sample(k, &patient_id, sensor),
            Event::SessionStart { patient_id } => self.session_start(k, &patient_id),
            Event::Beat { patient_id } => self.beat(k, &patient_id),
            Event::WindowEnd { patient_id } => self.window_end(k, &patient_id),
            Event::EpochEnd {} => self.epoch_end(k),
            Event::ExpertWake { patient_id } => {
                if self.expert.poll_at.get(&patient_id) == Some(&k.now()) {
                    self.expert.poll_at.remove(&patient_id);
                }
                self.expert_step(k, &patient_id, Vec::new())
            }
            Event::Submit { recommendation } => self.submit(k, seq, recommendation),
            Event::Deliver(d) => match target {
                CLOUD => self.deliver_cloud(k, d),
                EXPERT => self.deliver_expert(k, d),
                robot => {
                    let pid = self
                        .robots
                        .get(robot)
                        .cloned()
                        .ok_or_else(|| format!("delivery to unknown node {robot}"))?;
                    self.deliver_robot(k, &pid, d)
                }
            },
            Event::Notify(n) => {
                if self.collect_notices {
                    self.collected.push((k.now(), seq, n));
                }
                Ok(())
            }
        }
    }
}

impl Handler<Event> for World {
    fn handle(&mut self, k: &mut Kernel<Event>, ev: SimEvent<Event>) -> Result<(), String> {
        self.metrics.observe(ev.fire_at, &ev.target, &ev.payload);
        self.dispatch(k, ev.seq, &ev.target, ev.payload)?;
        self.check_invariants()
    }
}

/// Node names that receive events in a run of `cfg`.
pub fn node_names(cfg: &ScenarioConfig) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = [CLOUD, EXPERT, GATEWAY].iter().map(|s| s.to_string()).collect();
    for p in &cfg.patients {
        out.insert(robot_node(&p.patient_id));
        for kind in SensorKind::ALL {
            out.insert(crate::iot_sensors::sensor_id(&p.patient_id, kind));
        }
    }
    out
}
