use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// The seven worn medical signals followed by the four ambient ones.
#[allow(clippy::upper_case_acronyms)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SensorKind {
    ECG,
    EMG,
    Respiration,
    Heartbeat,
    BodyTemp,
    SystolicPressure,
    SpO2,
    AmbientTemp,
    Humidity,
    AirQuality,
    AtmPressure,
}

impl SensorKind {
    pub const ALL: [SensorKind; 11] = [
        SensorKind::ECG,
        SensorKind::EMG,
        SensorKind::Respiration,
        SensorKind::Heartbeat,
        SensorKind::BodyTemp,
        SensorKind::SystolicPressure,
        SensorKind::SpO2,
        SensorKind::AmbientTemp,
        SensorKind::Humidity,
        SensorKind::AirQuality,
        SensorKind::AtmPressure,
    ];

    pub fn is_medical(self) -> bool {
        self < SensorKind::AmbientTemp
    }

    pub fn medical() -> impl Iterator<Item = SensorKind> {
        Self::ALL.into_iter().filter(|k| k.is_medical())
    }

    pub fn ambient() -> impl Iterator<Item = SensorKind> {
        Self::ALL.into_iter().filter(|k| !k.is_medical())
    }

    pub fn unit(self) -> &'static str {
        match self {
            SensorKind::ECG | SensorKind::EMG => "mV",
            SensorKind::Respiration => "breaths/min",
            SensorKind::Heartbeat => "bpm",
            SensorKind::BodyTemp | SensorKind::AmbientTemp => "°C",
            SensorKind::SystolicPressure => "mmHg",
            SensorKind::SpO2 | SensorKind::Humidity => "%",
            SensorKind::AirQuality => "AQI",
            SensorKind::AtmPressure => "hPa",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SensorKind::ECG => "ECG",
            SensorKind::EMG => "EMG",
            SensorKind::Respiration => "Respiration",
            SensorKind::Heartbeat => "Heartbeat",
            SensorKind::BodyTemp => "BodyTemp",
            SensorKind::SystolicPressure => "SystolicPressure",
            SensorKind::SpO2 => "SpO2",
            SensorKind::AmbientTemp => "AmbientTemp",
            SensorKind::Humidity => "Humidity",
            SensorKind::AirQuality => "AirQuality",
            SensorKind::AtmPressure => "AtmPressure",
        }
    }
}

impl fmt::Display for SensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A closed or open interval on the real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub lo_open: bool,
    #[serde(default)]
    pub hi_open: bool,
}

// Clamping into an open interval stops this far inside the open end.
const OPEN_CLAMP_MARGIN: f64 = 1e-3;

impl Interval {
    pub const fn closed(lo: f64, hi: f64) -> Self {
        Interval {
            lo,
            hi,
            lo_open: false,
            hi_open: false,
        }
    }

    pub const fn open(lo: f64, hi: f64) -> Self {
        Interval {
            lo,
            hi,
            lo_open: true,
            hi_open: true,
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        if !v.is_finite() {
            return false;
        }
        let above = if self.lo_open { v > self.lo } else { v >= self.lo };
        let below = if self.hi_open { v < self.hi } else { v <= self.hi };
        above && below
    }

    pub fn strictly_inside(&self, v: f64) -> bool {
        v > self.lo && v < self.hi
    }

    pub fn clamp(&self, v: f64) -> f64 {
        let lo = if self.lo_open { self.lo + OPEN_CLAMP_MARGIN } else { self.lo };
        let hi = if self.hi_open { self.hi - OPEN_CLAMP_MARGIN } else { self.hi };
        if v.is_nan() {
            return lo;
        }
        v.clamp(lo, hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{},{}{}",
            if self.lo_open { '(' } else { '[' },
            self.lo,
            self.hi,
            if self.hi_open { ')' } else { ']' }
        )
    }
}

/// Physical plausibility bounds per sensor kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhysicalBounds(pub BTreeMap<SensorKind, Interval>);

impl Default for PhysicalBounds {
    fn default() -> Self {
        use SensorKind::*;
        PhysicalBounds(BTreeMap::from([
            (ECG, Interval::closed(-10.0, 10.0)),
            (EMG, Interval::closed(-10.0, 10.0)),
            (Respiration, Interval::closed(0.0, 80.0)),
            (Heartbeat, Interval::open(0.0, 300.0)),
            (BodyTemp, Interval::closed(30.0, 45.0)),
            (SystolicPressure, Interval::closed(50.0, 250.0)),
            (SpO2, Interval::closed(0.0, 100.0)),
            (AmbientTemp, Interval::closed(-40.0, 60.0)),
            (Humidity, Interval::closed(0.0, 100.0)),
            (AirQuality, Interval::closed(0.0, 500.0)),
            (AtmPressure, Interval::closed(850.0, 1100.0)),
        ]))
    }
}

impl PhysicalBounds {
    pub fn get(&self, kind: SensorKind) -> Interval {
        self.0
            .get(&kind)
            .copied()
            .unwrap_or(Interval::closed(f64::MIN, f64::MAX))
    }

    /// Overlay `overrides` on top of the defaults.
    pub fn with_overrides(overrides: &BTreeMap<SensorKind, Interval>) -> Self {
        let mut b = Self::default();
        b.0.extend(overrides.iter().map(|(k, v)| (*k, *v)));
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eleven_kinds_split_seven_four() {
        assert_eq!(SensorKind::ALL.len(), 11);
        assert_eq!(SensorKind::medical().count(), 7);
        assert_eq!(SensorKind::ambient().count(), 4);
        let b = PhysicalBounds::default();
        assert!(SensorKind::ALL.iter().all(|k| b.0.contains_key(k)));
    }

    #[test]
    fn interval_display_and_membership() {
        let b = PhysicalBounds::default();
        assert_eq!(b.get(SensorKind::SpO2).to_string(), "[0,100]");
        assert_eq!(b.get(SensorKind::Heartbeat).to_string(), "(0,300)");
        assert!(b.get(SensorKind::SpO2).contains(100.0));
        assert!(!b.get(SensorKind::Heartbeat).contains(0.0));
        assert!(!b.get(SensorKind::SpO2).contains(f64::NAN));
        assert!(b.get(SensorKind::Heartbeat).contains(b.get(SensorKind::Heartbeat).clamp(-5.0)));
    }
}
