//! Synthetic physiological and ambient signal generators.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::protocol::{Interval, PhysicalBounds, SensorFrame, SensorKind};
use crate::sim_kernel::SimTime;

pub const VITALS_SAMPLE_MS: u64 = 1_000;
pub const AMBIENT_SAMPLE_MS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorProfile {
    pub kind: SensorKind,
    pub baseline: f64,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default = "default_period")]
    pub period_ms: u64,
    #[serde(default)]
    pub noise_sd: f64,
    pub sample_period_ms: u64,
}

fn default_period() -> u64 {
    60_000
}

impl SensorProfile {
    /// Noise-free constant signal.
    pub fn constant(kind: SensorKind, baseline: f64, sample_period_ms: u64) -> Self {
        SensorProfile {
            kind,
            baseline,
            amplitude: 0.0,
            period_ms: default_period(),
            noise_sd: 0.0,
            sample_period_ms,
        }
    }

    /// Deterministic part of the signal at `t`.
    pub fn clean_value(&self, t: SimTime) -> f64 {
        if self.amplitude == 0.0 {
            return self.baseline;
        }
        let phase = 2.0 * PI * (t.millis() % self.period_ms) as f64 / self.period_ms as f64;
        self.baseline + self.amplitude * phase.sin()
    }

    pub fn check(&self) -> Result<(), String> {
        if self.period_ms == 0 {
            return Err(format!("{}.period_ms must be positive", self.kind.as_str()));
        }
        if self.sample_period_ms == 0 {
            return Err(format!("{}.sample_period_ms must be positive", self.kind.as_str()));
        }
        if !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() {
            return Err(format!("{}.noise_sd must be non-negative", self.kind.as_str()));
        }
        if !self.baseline.is_finite() || !self.amplitude.is_finite() {
            return Err(format!("{}: baseline and amplitude must be finite", self.kind.as_str()));
        }
        Ok(())
    }
}

/// Additive offset applied to one kind during `[onset, onset + duration_ms)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnomalyScript {
    pub kind: SensorKind,
    pub onset: SimTime,
    pub duration_ms: u64,
    pub delta: f64,
}

impl AnomalyScript {
    pub fn active_at(&self, t: SimTime) -> bool {
        t >= self.onset && t.millis() < self.onset.millis().saturating_add(self.duration_ms)
    }
}

/// Sample one value: sinusoid, optional Gaussian noise, anomaly offsets, then clamping.
///
/// The rng is only consumed when `noise_sd > 0`.
pub fn sample_value<R: Rng + ?Sized>(
    profile: &SensorProfile,
    scripts: &[AnomalyScript],
    bounds: Interval,
    t: SimTime,
    rng: &mut R,
) -> f64 {
    let mut v = profile.clean_value(t);
    if profile.noise_sd > 0.0 {
        let normal = Normal::new(0.0, profile.noise_sd).expect("checked noise_sd");
        v += normal.sample(rng);
    }
    for s in scripts.iter().filter(|s| s.kind == profile.kind && s.active_at(t)) {
        v += s.delta;
    }
    bounds.clamp(v)
}

/// One physical sensor: profile, scripts and a per-sensor sequence counter.
#[derive(Debug, Clone)]
pub struct SensorStream {
    pub sensor_id: String,
    pub patient_id: String,
    pub profile: SensorProfile,
    pub scripts: Vec<AnomalyScript>,
    pub bounds: Interval,
    seq: u64,
}

impl SensorStream {
    pub fn new(
        patient_id: &str,
        profile: SensorProfile,
        scripts: Vec<AnomalyScript>,
        bounds: &PhysicalBounds,
    ) -> Self {
        let scripts = scripts.into_iter().filter(|s| s.kind == profile.kind).collect();
        SensorStream {
            sensor_id: sensor_id(patient_id, profile.kind),
            patient_id: patient_id.to_string(),
            bounds: bounds.get(profile.kind),
            profile,
            scripts,
            seq: 0,
        }
    }

    pub fn generate_frame<R: Rng + ?Sized>(&mut self, t: SimTime, rng: &mut R) -> SensorFrame {
        debug_assert_eq!(t.millis() % self.profile.sample_period_ms, 0, "off-grid sample");
        let value = sample_value(&self.profile, &self.scripts, self.bounds, t, rng);
        let frame = SensorFrame {
            sensor_id: self.sensor_id.clone(),
            patient_id: self.patient_id.clone(),
            kind: self.profile.kind,
            t,
            value,
            seq: self.seq,
        };
        self.seq += 1;
        frame
    }

    pub fn frames_emitted(&self) -> u64 {
        self.seq
    }
}

pub fn sensor_id(patient_id: &str, kind: SensorKind) -> String {
    format!("sensor:{patient_id}:{}", kind.as_str())
}

/// Resting adult defaults with mild variation; none trips the default emergency rules.
pub fn default_profiles() -> BTreeMap<SensorKind, SensorProfile> {
    use SensorKind::*;
    let p = |kind, baseline, amplitude, period_ms, noise_sd| SensorProfile {
        kind,
        baseline,
        amplitude,
        period_ms,
        noise_sd,
        sample_period_ms: if SensorKind::is_medical(kind) {
            VITALS_SAMPLE_MS
        } else {
            AMBIENT_SAMPLE_MS
        },
    };
    [
        p(ECG, 1.0, 0.3, 1_000, 0.05),
        p(EMG, 0.5, 0.1, 5_000, 0.05),
        p(Respiration, 18.0, 2.0, 20_000, 0.5),
        p(Heartbeat, 85.0, 5.0, 60_000, 1.0),
        p(BodyTemp, 36.8, 0.2, 600_000, 0.05),
        p(SystolicPressure, 118.0, 6.0, 120_000, 2.0),
        p(SpO2, 97.0, 0.5, 60_000, 0.3),
        p(AmbientTemp, 22.0, 1.0, 600_000, 0.1),
        p(Humidity, 45.0, 3.0, 600_000, 0.5),
        p(AirQuality, 40.0, 5.0, 600_000, 1.0),
        p(AtmPressure, 1013.0, 1.0, 600_000, 0.2),
    ]
    .into_iter()
    .map(|p| (p.kind, p))
    .collect()
}
