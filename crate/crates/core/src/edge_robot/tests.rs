use proptest::prelude::*;

use super::*;
use crate::behavior_tree::builtin_trees;
use crate::protocol::{Modality, Validate};

fn frame(kind: SensorKind, t: u64, value: f64) -> SensorFrame {
    SensorFrame {
        sensor_id: format!("sensor:p1:{}", kind.as_str()),
        patient_id: "p1".into(),
        kind,
        t: SimTime(t),
        value,
        seq: t / 1000,
    }
}

fn net() -> NetworkInfo {
    NetworkInfo {
        network_type: "wifi".into(),
        service_data_flow_bytes: 0,
        communication_quality: 1.0,
    }
}

fn win(t0: u64, t1: u64) -> Window {
    Window::new(SimTime(t0), SimTime(t1))
}

#[test]
fn empty_window_fuses_to_zero_counts() {
    let r = fuse("p1", "r1", &[], &[], net(), win(0, 10_000)).unwrap();
    assert!(r.vitals.values().chain(r.ambient.values()).all(|s| s.count == 0));
    assert_eq!(r.vitals.len(), 7);
    assert_eq!(r.ambient.len(), 4);
    r.validate().unwrap();
}

#[test]
fn fuse_spo2_summary() {
    let frames = [frame(SensorKind::SpO2, 0, 97.0), frame(SensorKind::SpO2, 1000, 95.0), frame(SensorKind::SpO2, 2000, 96.0)];
    let r = fuse("p1", "r1", &frames, &[], net(), win(0, 10_000)).unwrap();
    let s = r.summary(SensorKind::SpO2).unwrap();
    assert_eq!((s.mean, s.min, s.max, s.count), (Some(96.0), Some(95.0), Some(97.0), 3));
}

#[test]
fn misrouted_frame_is_rejected() {
    let err = fuse("p1", "r1", &[frame(SensorKind::SpO2, 10_000, 97.0)], &[], net(), win(0, 10_000)).unwrap_err();
    assert!(matches!(err, EdgeError::OutOfWindowFrame { .. }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn fused_summaries_match_single_pass(
        t0 in 0u64..1_000_000,
        len in 1u64..60_000,
        raw in prop::collection::vec((0usize..11, 0.0f64..1.0, -1e3f64..1e3), 0..80),
    ) {
        let frames: Vec<SensorFrame> = raw
            .iter()
            .map(|&(k, pos, v)| frame(SensorKind::ALL[k], t0 + (pos * len as f64) as u64 % len, v))
            .collect();
        let r = fuse("p1", "r1", &frames, &[], net(), win(t0, t0 + len)).unwrap();
        for kind in SensorKind::ALL {
            let (mut n, mut sum, mut lo, mut hi) = (0u64, 0.0, f64::INFINITY, f64::NEG_INFINITY);
            for f in frames.iter().filter(|f| f.kind == kind) {
                n += 1;
                sum += f.value;
                lo = lo.min(f.value);
                hi = hi.max(f.value);
            }
            let s = r.summary(kind).unwrap();
            prop_assert_eq!(s.count, n);
            if n > 0 {
                prop_assert!((s.mean.unwrap() - sum / n as f64).abs() <= 1e-9 * (1.0 + sum.abs()));
                prop_assert_eq!(s.min, Some(lo));
                prop_assert_eq!(s.max, Some(hi));
            } else {
                prop_assert_eq!(s.mean, None);
            }
        }
    }
}

#[test]
fn monitor_examples() {
    let rules = EmergencyRuleSet::default();
    let alert = monitor(&frame(SensorKind::SpO2, 60_000, 85.0), &rules).unwrap();
    assert_eq!((alert.cause.kind, alert.cause.value, alert.cause.threshold), (SensorKind::SpO2, 85.0, 90.0));
    assert_eq!(alert.cause.direction, Direction::Below);
    assert_eq!(alert.created_at, SimTime(60_000));
    assert_eq!(alert.priority, RiskLevel::Critical);
    assert!(monitor(&frame(SensorKind::SpO2, 0, 90.0), &rules).is_none());
    assert!(monitor(&frame(SensorKind::AmbientTemp, 0, 55.0), &rules).is_none());
    let hb = monitor(&frame(SensorKind::Heartbeat, 0, 121.0), &rules).unwrap();
    assert_eq!((hb.cause.threshold, hb.cause.direction), (120.0, Direction::Above));
    assert!(monitor(&frame(SensorKind::Heartbeat, 0, 120.0), &rules).is_none());
}

#[test]
fn debounced_monitor_fires_once_per_excursion() {
    let rules = EmergencyRuleSet::default();
    let mut m = EmergencyMonitor::default();
    let values = [97.0, 85.0, 84.0, 86.0, 95.0, 80.0];
    let fired: Vec<bool> = values
        .iter()
        .enumerate()
        .map(|(i, v)| m.observe(&frame(SensorKind::SpO2, i as u64 * 1000, *v), &rules).is_some())
        .collect();
    assert_eq!(fired, vec![false, true, false, false, false, true]);
}

#[test]
fn default_rules_are_consistent() {
    EmergencyRuleSet::default().check(&PhysicalBounds::default()).unwrap();
    let bad = EmergencyRuleSet(vec![EmergencyRule { kind: SensorKind::SpO2, lower: Some(120.0), upper: None }]);
    assert!(bad.check(&PhysicalBounds::default()).is_err());
    let partial = EmergencyRuleSet(vec![EmergencyRule { kind: SensorKind::SpO2, lower: Some(90.0), upper: None }]);
    assert!(partial.check(&PhysicalBounds::default()).is_err());
}

fn robot(stage: TherapyStage, tree: &str) -> RobotState {
    RobotState::new("r1", TherapyCommand::new("p1", stage, tree), DEFAULT_FUSION_WINDOW_MS, DEFAULT_BEAT_MS)
}

/// Run a session to completion; returns (record, ticks).
fn run_session(r: &mut RobotState, mut respond: impl FnMut(TherapyStage, &ActionSpec) -> PatientResponse) -> SessionRecord {
    let cat = builtin_trees();
    let start = SimTime(1_000);
    r.start_session(start).unwrap();
    let tree = cat.get(&r.open_session.as_ref().unwrap().tree_id).unwrap().clone();
    let mut t = start;
    for _ in 0..1000 {
        let step = r.run_session_step(&tree, &mut respond, t).unwrap();
        if let Some(rec) = step.record {
            return rec;
        }
        t = t + r.beat_ms;
    }
    panic!("session never closed");
}

#[test]
fn single_action_tree_closes_after_one_step() {
    let tree = TreeDef::new("solo", TherapyStage::Entry, NodeDef::action("wave", "wave", Modality::Image)).unwrap();
    let mut r = robot(TherapyStage::Entry, "solo");
    r.start_session(SimTime(0)).unwrap();
    let step = r.run_session_step(&tree, |_, _| PatientResponse::Laugh, SimTime(0)).unwrap();
    let rec = step.record.unwrap();
    assert_eq!((rec.outcome, rec.steps, rec.event_count), (SessionOutcome::Success, 1, 1));
    assert!(r.open_session.is_none());
}

#[test]
fn silent_patient_fails_knockknock_after_retry_budget() {
    // Each of the two reachable actions gets 1 + 3 attempts.
    let mut r = robot(TherapyStage::Middle, "middle_knockknock");
    let rec = run_session(&mut r, |_, _| PatientResponse::NoResponse);
    assert_eq!(rec.outcome, SessionOutcome::Failure);
    assert_eq!(rec.steps, 2 * (1 + DEFAULT_MAX_RETRIES as u64));
    assert_eq!(rec.event_count, rec.steps);
    assert_eq!(rec.duration_ms, rec.steps * DEFAULT_BEAT_MS);
}

#[test]
fn withdrawal_fails_fast() {
    let mut r = robot(TherapyStage::Middle, "middle_knockknock");
    let rec = run_session(&mut r, |_, _| PatientResponse::Withdrawal);
    assert_eq!((rec.outcome, rec.steps), (SessionOutcome::Failure, 2));
}

#[test]
fn retry_budget_comes_from_session_params() {
    let mut cmd = TherapyCommand::new("p1", TherapyStage::Middle, "middle_knockknock");
    cmd.session_params.insert("max_retries".into(), "1".into());
    let mut r = RobotState::new("r1", cmd, DEFAULT_FUSION_WINDOW_MS, DEFAULT_BEAT_MS);
    assert_eq!(run_session(&mut r, |_, _| PatientResponse::NoResponse).steps, 4);
}

#[test]
fn cooperative_patient_succeeds_every_builtin() {
    for tree in builtin_trees().iter() {
        let mut r = robot(tree.stage, &tree.tree_id);
        let rec = run_session(&mut r, |_, _| PatientResponse::Laugh);
        assert_eq!(rec.outcome, SessionOutcome::Success, "{}", tree.tree_id);
        assert_eq!(rec.positive_fraction(), 1.0);
        let actions = tree.leaves().iter().filter(|l| l.kind == crate::behavior_tree::NodeKind::Action).count() as u64;
        assert!(rec.steps <= actions);
        assert_eq!(rec.steps, rec.event_count);
        assert_eq!(rec.duration_ms, rec.steps * DEFAULT_BEAT_MS);
    }
}

#[test]
fn step_without_session_errors() {
    let tree = builtin_trees().get("entry_playball").unwrap().clone();
    let mut r = robot(TherapyStage::Entry, "entry_playball");
    let err = r.run_session_step(&tree, |_, _| PatientResponse::Laugh, SimTime(0)).unwrap_err();
    assert_eq!(err, EdgeError::NoActiveSession("r1".into()));
    r.start_session(SimTime(0)).unwrap();
    let other = builtin_trees().get("entry_chasing").unwrap().clone();
    let err = r.run_session_step(&other, |_, _| PatientResponse::Laugh, SimTime(0)).unwrap_err();
    assert!(matches!(err, EdgeError::WrongTree { .. }));
}

#[test]
fn idle_update_applies_immediately() {
    let cat = builtin_trees();
    let mut r = robot(TherapyStage::Entry, "entry_playball");
    r.apply_update(TherapyCommand::new("p1", TherapyStage::Entry, "entry_spinning"), &cat).unwrap();
    r.start_session(SimTime(0)).unwrap();
    assert_eq!(r.open_session.as_ref().unwrap().tree_id, "entry_spinning");
}

#[test]
fn mid_session_update_waits_one_boundary() {
    let cat = builtin_trees();
    let mut r = robot(TherapyStage::Entry, "entry_playball");
    r.start_session(SimTime(0)).unwrap();
    let tree = cat.get("entry_playball").unwrap().clone();
    r.run_session_step(&tree, |_, _| PatientResponse::Laugh, SimTime(0)).unwrap();
    r.apply_update(TherapyCommand::default_for("p1", TherapyStage::Basic), &cat).unwrap();
    assert_eq!(r.open_session.as_ref().unwrap().tree_id, "entry_playball");
    let mut t = 5_000;
    loop {
        let step = r.run_session_step(&tree, |_, _| PatientResponse::Laugh, SimTime(t)).unwrap();
        if let Some(rec) = step.record {
            assert_eq!(rec.tree_id, "entry_playball");
            assert_eq!(rec.outcome, SessionOutcome::Success);
            break;
        }
        t += 5_000;
    }
    r.start_session(SimTime(t + 30_000)).unwrap();
    let s = r.open_session.as_ref().unwrap();
    assert_eq!((s.tree_id.as_str(), s.stage), ("basic_aladdin", TherapyStage::Basic));
}

#[test]
fn mismatched_tree_is_rejected() {
    let mut r = robot(TherapyStage::Entry, "entry_playball");
    let err = r
        .apply_update(TherapyCommand::new("p1", TherapyStage::Entry, "middle_knockknock"), &builtin_trees())
        .unwrap_err();
    assert!(matches!(err, EdgeError::StageTreeMismatch { .. }));
    assert_eq!(r.active_command.tree_id, "entry_playball");
}

/// A session record padded so its envelope is exactly `size` bytes.
fn record_of_size(size: u64) -> Message {
    let mut rec = SessionRecord {
        session_id: String::new(),
        robot_id: "r1".into(),
        patient_id: "p1".into(),
        tree_id: "entry_playball".into(),
        stage: TherapyStage::Entry,
        outcome: SessionOutcome::Success,
        steps: 1,
        event_count: 1,
        positive_responses: 1,
        started_at: SimTime(0),
        duration_ms: 5000,
    };
    let base = Message::SessionRecord(rec.clone()).wire_size();
    rec.session_id = "x".repeat((size - base) as usize);
    let m = Message::SessionRecord(rec);
    assert_eq!(m.wire_size(), size);
    m
}

#[test]
fn uplink_bytes_reported_in_next_window() {
    let mut r = robot(TherapyStage::Entry, "entry_playball");
    assert!(r.uplink_flush().is_empty());
    r.uplink_buffer.push(record_of_size(400));
    r.uplink_buffer.push(record_of_size(600));
    let sent = r.uplink_flush();
    assert_eq!(sent.iter().map(|(_, s)| *s).collect::<Vec<_>>(), vec![400, 600]);
    let rec = r.close_window(SimTime(10_000), "wifi", 0.9).unwrap();
    assert_eq!(rec.network_info.service_data_flow_bytes, 1000);
    // The record just built goes out next and is reported one window later.
    let size = r.uplink_flush()[0].1;
    let next = r.close_window(SimTime(20_000), "wifi", 0.9).unwrap();
    assert_eq!(next.network_info.service_data_flow_bytes, size);
    assert_eq!(next.window, win(10_000, 20_000));
}

#[test]
fn window_close_keeps_later_frames() {
    let mut r = robot(TherapyStage::Entry, "entry_playball");
    r.record_frame(frame(SensorKind::SpO2, 9_000, 97.0));
    r.record_frame(frame(SensorKind::SpO2, 10_000, 96.0));
    let first = r.close_window(SimTime(10_000), "wifi", 1.0).unwrap();
    assert_eq!(first.summary(SensorKind::SpO2).unwrap().count, 1);
    let second = r.close_window(SimTime(20_000), "wifi", 1.0).unwrap();
    assert_eq!(second.summary(SensorKind::SpO2).unwrap().max, Some(96.0));
}
