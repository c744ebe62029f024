use std::collections::BTreeMap;

use crate::protocol::{ResourcePlan, ResourceVector, RiskLevel};
use crate::sim_kernel::SimTime;

/// Split `capacity` across demands: strict priority by level, proportional within a level.
///
/// Output is index-aligned with `demands`. Negative or non-finite inputs count as zero.
pub fn allocate_resource(demands: &[(RiskLevel, f64)], capacity: f64) -> Vec<f64> {
    let clean = |v: f64| if v.is_finite() && v > 0.0 { v } else { 0.0 };
    let mut out = vec![0.0; demands.len()];
    let mut remaining = clean(capacity);
    for level in [RiskLevel::Critical, RiskLevel::High, RiskLevel::Moderate, RiskLevel::Low] {
        let tier: Vec<usize> = (0..demands.len()).filter(|&i| demands[i].0 == level).collect();
        let total: f64 = tier.iter().map(|&i| clean(demands[i].1)).sum();
        if total <= 0.0 {
            continue;
        }
        if total <= remaining {
            for &i in &tier {
                out[i] = clean(demands[i].1);
            }
            remaining -= total;
        } else {
            for &i in &tier {
                out[i] = clean(demands[i].1) * remaining / total;
            }
            remaining = 0.0;
        }
    }
    out
}

/// Allocate every resource dimension independently.
pub fn allocate(
    epoch: SimTime,
    demands: &BTreeMap<String, ResourceVector>,
    risk_levels: &BTreeMap<String, RiskLevel>,
    capacities: ResourceVector,
) -> ResourcePlan {
    let ids: Vec<&String> = demands.keys().collect();
    let level = |id: &String| risk_levels.get(id).copied().unwrap_or(RiskLevel::Low);
    let mut per_patient = vec![[0.0; 3]; ids.len()];
    let mut used = [0.0; 3];
    let caps = capacities.components();
    for c in 0..3 {
        let column: Vec<(RiskLevel, f64)> = ids.iter().map(|id| (level(id), demands[*id].components()[c])).collect();
        for (i, a) in allocate_resource(&column, caps[c]).into_iter().enumerate() {
            per_patient[i][c] = a;
            used[c] += a;
        }
    }
    ResourcePlan {
        epoch,
        demands: demands.clone(),
        risk_levels: ids.iter().map(|id| ((*id).clone(), level(id))).collect(),
        allocations: ids
            .iter()
            .zip(per_patient)
            .map(|(id, a)| ((*id).clone(), ResourceVector::from_components(a)))
            .collect(),
        capacities,
        used: ResourceVector::from_components(used),
    }
}
