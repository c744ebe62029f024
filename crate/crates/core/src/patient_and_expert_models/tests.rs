use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use TherapyStage::*;

fn summary(outcome: SessionOutcome, positive_fraction: f64) -> SessionSummary {
    SessionSummary {
        tree_id: "entry_playball".into(),
        stage: Entry,
        outcome,
        positive_fraction,
    }
}

#[test]
fn zero_engagement_is_always_negative() {
    let mut p = PatientModel::new("p", Entry, 0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        assert!(!p.respond(Entry, &ResponseModel::default(), &mut rng).is_positive());
    }
    assert_eq!(p.engagement, 0.0);
}

#[test]
fn full_cooperation_is_always_positive() {
    let mut p = PatientModel::new("p", Middle, 1.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        assert!(p.respond(Middle, &ResponseModel::default(), &mut rng).is_positive());
    }
    assert_eq!(p.engagement, 1.0);
}

#[test]
fn match_multipliers() {
    let m = ResponseModel::default();
    assert_eq!(m.stage_match(Basic, Basic), 1.0);
    assert_eq!(m.stage_match(Middle, Basic), 0.5);
    assert_eq!(m.stage_match(Entry, Basic), 0.8);
    assert_eq!(m.stage_match(Advanced, Basic), 0.2);
    assert_eq!(m.stage_match(Entry, Advanced), 0.2);
}

#[test]
fn engagement_updates() {
    let m = ResponseModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut p = PatientModel::new("p", Entry, 0.5, 0.5);
    for _ in 0..200 {
        let before = p.engagement;
        let r = p.respond(Entry, &m, &mut rng);
        let expected = match r {
            PatientResponse::Laugh | PatientResponse::VerbalReply => before + 0.02,
            PatientResponse::Withdrawal => before - 0.05,
            PatientResponse::NoResponse => before,
        };
        assert!((p.engagement - expected.clamp(0.0, 1.0)).abs() < 1e-12);
    }
}

#[test]
fn progression_rule_examples() {
    use SessionOutcome::*;
    let rule = ProgressionRule::default();
    let h = [summary(Success, 0.7), summary(Success, 0.9), summary(Success, 0.6)];
    assert!(maybe_advance(&h, &rule));
    let h = [summary(Success, 0.7), summary(Failure, 0.9), summary(Success, 0.6)];
    assert!(!maybe_advance(&h, &rule));
    let h = [summary(Success, 0.7), summary(Success, 0.59), summary(Success, 0.6)];
    assert!(!maybe_advance(&h, &rule));
    assert!(!maybe_advance(&h[..2], &rule));
    // Only the last K count.
    let h = [summary(Failure, 0.0), summary(Success, 1.0), summary(Success, 1.0), summary(Success, 1.0)];
    assert!(maybe_advance(&h, &rule));
}

fn policy(mode: ExpertMode) -> ExpertPolicy {
    ExpertPolicy {
        expert_id: "dr".into(),
        mode,
        ack_delay_ms: 5000,
        live: false,
    }
}

fn view(stage: TherapyStage, risk: RiskLevel, alerts: Vec<PendingAlert>) -> DossierView {
    DossierView {
        patient_id: "p1".into(),
        stage,
        risk,
        alerts,
    }
}

#[test]
fn auto_advance_emits_one_stage_change() {
    let sig = AdvanceSignal { patient_id: "p1".into(), from: Entry };
    let step = expert_step(&policy(ExpertMode::AutoAdvance), &view(Entry, RiskLevel::High, vec![]), &[sig], SimTime(10));
    assert_eq!(step.recommendations.len(), 1);
    assert_eq!(step.recommendations[0].recommendation, Recommendation::TherapyStageChange { target: Basic });
    assert_eq!(step.recommendations[0].issued_at, SimTime(10));
}

#[test]
fn conservative_defers_until_low_risk() {
    let sig = AdvanceSignal { patient_id: "p1".into(), from: Basic };
    let p = policy(ExpertMode::Conservative);
    let step = expert_step(&p, &view(Basic, RiskLevel::High, vec![]), std::slice::from_ref(&sig), SimTime(0));
    assert!(step.recommendations.is_empty());
    assert_eq!(step.deferred, vec![sig.clone()]);
    let step = expert_step(&p, &view(Basic, RiskLevel::Low, vec![]), &step.deferred, SimTime(1));
    assert_eq!(step.recommendations[0].recommendation, Recommendation::TherapyStageChange { target: Middle });
}

#[test]
fn acks_wait_for_delay() {
    let alerts = vec![PendingAlert { alert_id: "a1".into(), received_at: SimTime(60_021) }];
    let p = policy(ExpertMode::AutoAdvance);
    assert!(expert_step(&p, &view(Entry, RiskLevel::Critical, alerts.clone()), &[], SimTime(65_020)).recommendations.is_empty());
    let step = expert_step(&p, &view(Entry, RiskLevel::Critical, alerts), &[], SimTime(65_021));
    assert_eq!(step.recommendations[0].recommendation, Recommendation::EmergencyAck { alert_id: "a1".into() });
}

#[test]
fn live_mode_disables_stage_changes_only() {
    let mut p = policy(ExpertMode::AutoAdvance);
    p.live = true;
    let sig = AdvanceSignal { patient_id: "p1".into(), from: Entry };
    let alerts = vec![PendingAlert { alert_id: "a1".into(), received_at: SimTime(0) }];
    let step = expert_step(&p, &view(Entry, RiskLevel::Low, alerts), &[sig], SimTime(5000));
    assert_eq!(step.recommendations.len(), 1);
    assert!(matches!(step.recommendations[0].recommendation, Recommendation::EmergencyAck { .. }));
}

#[test]
fn advanced_patients_never_advance() {
    let sig = AdvanceSignal { patient_id: "p1".into(), from: Advanced };
    let step = expert_step(&policy(ExpertMode::AutoAdvance), &view(Advanced, RiskLevel::Low, vec![]), &[sig], SimTime(0));
    assert!(step.recommendations.is_empty());
}

#[test]
fn empirical_rate_matches_closed_form() {
    let m = ResponseModel::default();
    let mut params = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..20 {
        let e: f64 = params.random();
        let c: f64 = params.random();
        let ps = TherapyStage::ALL[params.random_range(0..4)];
        let a = TherapyStage::ALL[params.random_range(0..4)];
        let p = e * c * m.stage_match(a, ps);
        let mut rng = ChaCha8Rng::seed_from_u64(case);
        let mut hits = 0;
        for _ in 0..10_000 {
            // Fresh state per draw so p stays fixed.
            let mut patient = PatientModel::new("p", ps, e, c);
            hits += patient.respond(a, &m, &mut rng).is_positive() as u32;
        }
        let rate = hits as f64 / 10_000.0;
        assert!((rate - p).abs() <= 0.02, "case {case}: rate {rate} vs p {p}");
        let sigma = (p * (1.0 - p) / 10_000.0).sqrt();
        assert!((rate - p).abs() <= 3.0 * sigma + 1e-12, "case {case}: outside 3σ");
    }
}

proptest! {
    #[test]
    fn engagement_stays_in_unit_interval(seed in any::<u64>(), e in 0.0f64..=1.0, c in 0.0f64..=1.0, steps in 1usize..2000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = PatientModel::new("p", Entry, e, c);
        for i in 0..steps {
            p.respond(TherapyStage::ALL[i % 4], &ResponseModel::default(), &mut rng);
            prop_assert!((0.0..=1.0).contains(&p.engagement));
        }
    }
}
