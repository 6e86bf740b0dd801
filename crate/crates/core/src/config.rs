//! Scenario configuration. JSON with unknown keys rejected; every section
//! except `seed` and the scenario core has defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qlink::QlinkParams;
use crate::trustnet::{FaultKind, OperationMode, QuantumAgreementParams, TrustParams};

pub const OUTPUT_DIR_ENV: &str = "QTRUST_OUTPUT_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{origin}: field `{field}`: {message}")]
    Parse {
        origin: String,
        field: String,
        message: String,
    },
    #[error("invalid value for `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub scenario: Scenario,
    #[serde(default)]
    pub workload: Workload,
    #[serde(default)]
    pub lora: LoraSection,
    #[serde(default)]
    pub nvis: NvisSection,
    #[serde(default)]
    pub consensus: ConsensusSection,
    #[serde(default)]
    pub quantum: QlinkParams,
    #[serde(default)]
    pub trust: TrustSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub spots: usize,
    pub redundancy: usize,
    pub mode: OperationMode,
    pub p_b0: f64,
    #[serde(default = "default_fault_kind")]
    pub fault_kind: FaultKind,
    /// Members that report wrong values from a given day on.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub persistent_faults: Vec<PersistentFault>,
}

fn default_fault_kind() -> FaultKind {
    FaultKind::Soft
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersistentFault {
    pub spot: usize,
    pub member: usize,
    #[serde(default)]
    pub from_day: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Workload {
    pub days: f64,
    pub warmup_days: f64,
    /// Interval between synchronized readings of every sensor.
    pub reading_period_s: f64,
    /// Each spot samples at a uniform offset in [0, jitter) after the tick.
    pub reading_jitter_s: f64,
    pub payload_bytes: u32,
    pub header_bytes: u32,
    /// Size of one relayed vote inside a consensus message.
    pub vote_entry_bytes: u32,
    /// How long the concentrator waits for a spot's reports before bundling.
    pub collect_window_s: f64,
    /// A value counts only if it reaches the control center this soon.
    pub max_reception_s: f64,
    pub mean_temperature_c: f64,
    pub seasonal_amplitude_c: f64,
    pub temperature_noise_c: f64,
}

impl Default for Workload {
    fn default() -> Self {
        Self {
            days: 400.0,
            warmup_days: 7.0,
            reading_period_s: 6.0 * 3600.0,
            reading_jitter_s: 0.0,
            payload_bytes: 100,
            header_bytes: 16,
            vote_entry_bytes: 8,
            collect_window_s: 10.0,
            max_reception_s: 6.0 * 3600.0,
            mean_temperature_c: -2.0,
            seasonal_amplitude_c: 8.0,
            temperature_noise_c: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoraSection {
    pub bitrate_bps: f64,
    pub frame_error: f64,
    pub queue_capacity_bytes: u64,
}

impl Default for LoraSection {
    fn default() -> Self {
        Self {
            bitrate_bps: crate::engine::DEFAULT_LORA_BITRATE,
            frame_error: 0.05,
            queue_capacity_bytes: 16_384,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NvisSection {
    pub concentrators: usize,
    pub p_up: f64,
    pub mean_up_s: f64,
    pub bitrate_bps: f64,
    pub bundle_error: f64,
    pub bundle_header_bytes: u32,
    pub dtn_capacity_bytes: u64,
}

impl Default for NvisSection {
    fn default() -> Self {
        Self {
            concentrators: 5,
            p_up: 0.7,
            mean_up_s: 7.0 * 3600.0,
            bitrate_bps: 2400.0,
            bundle_error: 0.26,
            bundle_header_bytes: 32,
            dtn_capacity_bytes: 1 << 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConsensusSection {
    /// Length of one synchronous classical round.
    pub round_duration_s: f64,
    /// Listening window after a quantum-round broadcast.
    pub broadcast_window_s: f64,
    pub round_success: f64,
    pub max_rounds: u32,
    pub pairs_per_round: u32,
}

impl Default for ConsensusSection {
    fn default() -> Self {
        let q = QuantumAgreementParams::default();
        Self {
            round_duration_s: 12.0,
            broadcast_window_s: 10.0,
            round_success: q.round_success,
            max_rounds: q.max_rounds,
            pairs_per_round: q.pairs_per_round,
        }
    }
}

impl ConsensusSection {
    pub fn quantum(&self) -> QuantumAgreementParams {
        QuantumAgreementParams {
            round_success: self.round_success,
            max_rounds: self.max_rounds,
            pairs_per_round: self.pairs_per_round,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrustSection {
    pub weight: f64,
    pub threshold: f64,
    pub hysteresis: f64,
    pub probe_period_s: f64,
    pub initial_score: f64,
    /// Member pairs that never exchange data, as [observer, subject].
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub exclude_pairs: Vec<[usize; 2]>,
}

impl Default for TrustSection {
    fn default() -> Self {
        let t = TrustParams::default();
        Self {
            weight: t.weight,
            threshold: t.threshold,
            hysteresis: t.hysteresis,
            probe_period_s: t.probe_period_s,
            initial_score: t.initial_score,
            exclude_pairs: Vec::new(),
        }
    }
}

impl TrustSection {
    pub fn params(&self) -> TrustParams {
        TrustParams {
            weight: self.weight,
            threshold: self.threshold,
            hysteresis: self.hysteresis,
            probe_period_s: self.probe_period_s,
            initial_score: self.initial_score,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Log,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub spots: Vec<usize>,
    pub redundancy: Vec<usize>,
    pub p_b0_min: f64,
    pub p_b0_max: f64,
    pub p_b0_points: usize,
    pub spacing: Spacing,
    pub modes: Vec<OperationMode>,
    pub seeds: u64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            spots: vec![32, 64],
            redundancy: (1..=5).collect(),
            p_b0_min: 1e-3,
            p_b0_max: 1e-1,
            p_b0_points: 9,
            spacing: Spacing::Log,
            modes: OperationMode::ALL.to_vec(),
            seeds: 10,
        }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::new(1, 32, 4, OperationMode::SocialQuantumConsensus, 0.01)
    }
}

impl ScenarioConfig {
    /// Minimal valid config with every default.
    pub fn new(seed: u64, spots: usize, redundancy: usize, mode: OperationMode, p_b0: f64) -> Self {
        Self {
            seed,
            output_dir: None,
            scenario: Scenario {
                spots,
                redundancy,
                mode,
                p_b0,
                fault_kind: FaultKind::Soft,
                persistent_faults: Vec::new(),
            },
            workload: Workload::default(),
            lora: LoraSection::default(),
            nvis: NvisSection::default(),
            consensus: ConsensusSection::default(),
            quantum: QlinkParams::default(),
            trust: TrustSection::default(),
            sweep: SweepSection::default(),
        }
    }

    pub fn from_json_str(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            ConfigError::Parse {
                origin: format!("{origin}:{}:{}", inner.line(), inner.column()),
                field,
                message: inner.to_string(),
            }
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text, &path.display().to_string())
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks ranges and cross-field constraints for a single run.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.scenario;
        if s.spots == 0 {
            return Err(invalid("scenario.spots", "must be positive"));
        }
        s.mode
            .check_group(s.redundancy)
            .map_err(|e| invalid("scenario.redundancy", e.to_string()))?;
        if !(0.0..=1.0).contains(&s.p_b0) {
            return Err(invalid("scenario.p_b0", "must be within [0,1]"));
        }
        for (i, f) in s.persistent_faults.iter().enumerate() {
            if f.spot >= s.spots || f.member >= s.redundancy || !(f.from_day >= 0.0) {
                return Err(invalid(
                    &format!("scenario.persistent_faults[{i}]"),
                    "spot/member out of range or negative day",
                ));
            }
        }
        let w = &self.workload;
        if !(w.days > 0.0) || !(w.warmup_days >= 0.0) || w.warmup_days >= w.days {
            return Err(invalid("workload.days", "need 0 <= warmup_days < days"));
        }
        if !(w.reading_period_s > 0.0) {
            return Err(invalid("workload.reading_period_s", "must be positive"));
        }
        if !(w.reading_jitter_s >= 0.0) {
            return Err(invalid("workload.reading_jitter_s", "must be non-negative"));
        }
        if w.payload_bytes == 0 {
            return Err(invalid("workload.payload_bytes", "must be positive"));
        }
        if !(w.collect_window_s >= 0.0) {
            return Err(invalid("workload.collect_window_s", "must be non-negative"));
        }
        if !(w.max_reception_s > 0.0) {
            return Err(invalid("workload.max_reception_s", "must be positive"));
        }
        if !(w.temperature_noise_c >= 0.0) {
            return Err(invalid("workload.temperature_noise_c", "must be non-negative"));
        }
        let l = &self.lora;
        if !(l.bitrate_bps > 0.0) {
            return Err(invalid("lora.bitrate_bps", "must be positive"));
        }
        if !(0.0..=1.0).contains(&l.frame_error) {
            return Err(invalid("lora.frame_error", "must be within [0,1]"));
        }
        if l.queue_capacity_bytes == 0 {
            return Err(invalid("lora.queue_capacity_bytes", "must be positive"));
        }
        let n = &self.nvis;
        if n.concentrators == 0 {
            return Err(invalid("nvis.concentrators", "must be positive"));
        }
        if !(0.7..=1.0).contains(&n.p_up) {
            return Err(invalid("nvis.p_up", "must be within [0.7,1]"));
        }
        if !(n.mean_up_s > 0.0) || !(n.bitrate_bps > 0.0) {
            return Err(invalid("nvis", "mean_up_s and bitrate_bps must be positive"));
        }
        if !(0.0..=1.0).contains(&n.bundle_error) {
            return Err(invalid("nvis.bundle_error", "must be within [0,1]"));
        }
        let c = &self.consensus;
        if !(c.round_duration_s > 0.0) || !(c.broadcast_window_s > 0.0) {
            return Err(invalid("consensus", "round and broadcast windows must be positive"));
        }
        c.quantum()
            .validate()
            .map_err(|m| invalid("consensus", m))?;
        self.quantum
            .validate()
            .map_err(|e| invalid("quantum", e.to_string()))?;
        if s.mode.quantum() && self.quantum.reserved_bps >= l.bitrate_bps {
            return Err(invalid(
                "quantum.reserved_bps",
                "reservation must leave LoRa capacity for data",
            ));
        }
        self.trust
            .params()
            .validate()
            .map_err(|m| invalid("trust", m))?;
        for (i, [a, b]) in self.trust.exclude_pairs.iter().enumerate() {
            if *a >= s.redundancy || *b >= s.redundancy || a == b {
                return Err(invalid(
                    &format!("trust.exclude_pairs[{i}]"),
                    "members must be distinct and below redundancy",
                ));
            }
        }
        Ok(())
    }

    /// Output directory: explicit flag, then the environment, then the
    /// file, then `out`.
    pub fn resolve_output_dir(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if let Ok(p) = std::env::var(OUTPUT_DIR_ENV) {
            if !p.is_empty() {
                return PathBuf::from(p);
            }
        }
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}
