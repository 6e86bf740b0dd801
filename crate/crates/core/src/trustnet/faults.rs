use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultKind {
    /// Wrong value emitted.
    Soft,
    /// Nothing emitted.
    Crash,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ByzantineProfile {
    pub p_b0: f64,
    pub fault_kind: FaultKind,
}

/// Ground-state observation at a measuring spot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reading {
    pub frozen: bool,
    pub temperature_c: f64,
}

impl Reading {
    pub fn from_temperature(temperature_c: f64) -> Self {
        Self {
            frozen: temperature_c < 0.0,
            temperature_c,
        }
    }

    /// Soft fault: the frozen flag flips and the temperature is mirrored so
    /// the report stays self-consistent.
    pub fn corrupted(self) -> Self {
        Self {
            frozen: !self.frozen,
            temperature_c: if self.temperature_c == 0.0 {
                -0.5
            } else {
                -self.temperature_c
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sensed {
    Report { reading: Reading, faulty: bool },
    Crash,
}

impl Sensed {
    pub fn value(&self) -> Option<bool> {
        match self {
            Sensed::Report { reading, .. } => Some(reading.frozen),
            Sensed::Crash => None,
        }
    }
}

pub fn sense<R: Rng + ?Sized>(profile: &ByzantineProfile, truth: Reading, rng: &mut R) -> Sensed {
    let faulty = profile.p_b0 > 0.0 && rng.random::<f64>() < profile.p_b0;
    match (faulty, profile.fault_kind) {
        (false, _) => Sensed::Report {
            reading: truth,
            faulty: false,
        },
        (true, FaultKind::Soft) => Sensed::Report {
            reading: truth.corrupted(),
            faulty: true,
        },
        (true, FaultKind::Crash) => Sensed::Crash,
    }
}
