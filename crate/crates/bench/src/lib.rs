//! Shared fixtures for the benchmarks under `benches/`.

use ecsim_core::gateway::ScenarioConfig;

pub const REFERENCE: &str = include_str!("../../../scenarios/reference.json");

pub fn reference() -> ScenarioConfig {
    ScenarioConfig::from_json(REFERENCE).expect("reference scenario parses")
}

/// The reference scenario with `n` patients cycling through the stages.
pub fn with_patients(n: usize) -> ScenarioConfig {
    let mut cfg = reference();
    let template = cfg.patients.clone();
    cfg.patients = (0..n)
        .map(|i| {
            let mut p = template[i % template.len()].clone();
            p.patient_id = format!("p{}", i + 1);
            p
        })
        .collect();
    cfg
}
