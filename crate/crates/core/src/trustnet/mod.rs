//! Trustworthiness layers: fault injection, social trust with ostracism,
//! classical EIG agreement and the quantum-coin agreement, plus the six
//! operation modes built from them.

pub mod eig;
mod faults;
pub mod quantum;
mod trust;

pub use eig::{f_max, Behavior, ClassicalRun, EigShape};
pub use faults::{sense, ByzantineProfile, FaultKind, Reading, Sensed};
pub use quantum::{session_pairs, QuantumAgreementParams, QuantumRun};
pub use trust::{TrustLedger, TrustParams};

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrustnetError {
    #[error("unknown operation mode '{0}'")]
    UnknownMode(String),
    #[error("{mode} needs at least 4 redundant sensors, got {n}")]
    GroupTooSmall { mode: OperationMode, n: usize },
    #[error("redundancy {0} outside 1..=10")]
    Redundancy(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperationMode {
    Standard,
    Social,
    Consensus,
    QuantumConsensus,
    SocialConsensus,
    SocialQuantumConsensus,
}

impl OperationMode {
    pub const ALL: [OperationMode; 6] = [
        OperationMode::Standard,
        OperationMode::Social,
        OperationMode::Consensus,
        OperationMode::QuantumConsensus,
        OperationMode::SocialConsensus,
        OperationMode::SocialQuantumConsensus,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OperationMode::Standard => "standard",
            OperationMode::Social => "social",
            OperationMode::Consensus => "consensus",
            OperationMode::QuantumConsensus => "quantum-consensus",
            OperationMode::SocialConsensus => "social-consensus",
            OperationMode::SocialQuantumConsensus => "social-quantum-consensus",
        }
    }

    /// Label used in tables.
    pub fn title(self) -> &'static str {
        match self {
            OperationMode::Standard => "Standard",
            OperationMode::Social => "Social",
            OperationMode::Consensus => "Consensus",
            OperationMode::QuantumConsensus => "QuantumConsensus",
            OperationMode::SocialConsensus => "Social+Consensus",
            OperationMode::SocialQuantumConsensus => "Social+QuantumConsensus",
        }
    }

    pub fn social(self) -> bool {
        matches!(
            self,
            OperationMode::Social
                | OperationMode::SocialConsensus
                | OperationMode::SocialQuantumConsensus
        )
    }

    pub fn consensus(self) -> bool {
        self.classical() || self.quantum()
    }

    pub fn classical(self) -> bool {
        matches!(self, OperationMode::Consensus | OperationMode::SocialConsensus)
    }

    pub fn quantum(self) -> bool {
        matches!(
            self,
            OperationMode::QuantumConsensus | OperationMode::SocialQuantumConsensus
        )
    }

    /// Consensus modes need a group that tolerates at least one fault.
    pub fn check_group(self, n: usize) -> Result<(), TrustnetError> {
        if !(1..=10).contains(&n) {
            return Err(TrustnetError::Redundancy(n));
        }
        if self.consensus() && n < 4 {
            return Err(TrustnetError::GroupTooSmall { mode: self, n });
        }
        Ok(())
    }

    /// Share of members a spot can lose to faults without a wrong outcome.
    pub fn byzantine_tolerance(self, n: usize) -> f64 {
        if self.consensus() && n > 0 {
            f_max(n) as f64 / n as f64
        } else {
            0.0
        }
    }
}

impl fmt::Display for OperationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OperationMode {
    type Err = TrustnetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Ok(match key.as_str() {
            "standard" => OperationMode::Standard,
            "social" => OperationMode::Social,
            "consensus" => OperationMode::Consensus,
            "quantumconsensus" | "qc" => OperationMode::QuantumConsensus,
            "socialconsensus" | "sc" => OperationMode::SocialConsensus,
            "socialquantumconsensus" | "sqc" => OperationMode::SocialQuantumConsensus,
            _ => return Err(TrustnetError::UnknownMode(s.to_string())),
        })
    }
}

/// Message transport seen by the synchronous agreement drivers.
pub trait VoteChannel {
    fn deliver(&mut self, round: usize, from: usize, to: usize, bytes: u32) -> bool;
}

/// Every message arrives.
pub struct PerfectChannel;

impl VoteChannel for PerfectChannel {
    fn deliver(&mut self, _round: usize, _from: usize, _to: usize, _bytes: u32) -> bool {
        true
    }
}

impl<F: FnMut(usize, usize, usize, u32) -> bool> VoteChannel for F {
    fn deliver(&mut self, round: usize, from: usize, to: usize, bytes: u32) -> bool {
        self(round, from, to, bytes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgreementOutcome {
    /// Decision per member; `None` when no quorum formed.
    pub decisions: Vec<Option<bool>>,
    pub rounds: u32,
    pub messages: u64,
    pub bytes: u64,
    pub sessions: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameSizes {
    pub header: u32,
    pub entry: u32,
}

impl Default for FrameSizes {
    fn default() -> Self {
        Self {
            header: 16,
            entry: 8,
        }
    }
}

/// Synchronous classical agreement over `channel`. `reports[i] = None`
/// marks a crashed member.
pub fn classical_agreement<C: VoteChannel>(
    reports: &[Option<bool>],
    sizes: FrameSizes,
    channel: &mut C,
) -> AgreementOutcome {
    let mut run = ClassicalRun::new(reports.to_vec());
    let n = run.members();
    let (mut messages, mut bytes) = (0u64, 0u64);
    for r in 1..=run.rounds() {
        let size = run.message_bytes(r, sizes.header, sizes.entry);
        let senders: Vec<usize> = (0..n).filter(|&j| run.sends(j)).collect();
        for from in senders {
            for to in (0..n).filter(|&i| i != from) {
                messages += 1;
                bytes += size as u64;
                let ok = channel.deliver(r, from, to, size);
                run.record(r, from, to, ok);
            }
        }
    }
    AgreementOutcome {
        decisions: (0..n).map(|i| run.decide(i)).collect(),
        rounds: run.rounds() as u32,
        messages,
        bytes,
        sessions: 0,
    }
}

/// Synchronous quantum-coin agreement. `coin` is read once per round from
/// the shared sessions; a broadcast costs one frame per sender.
pub fn quantum_agreement<C: VoteChannel, R: Rng + ?Sized, K: FnMut(u32) -> Option<bool>>(
    reports: &[Option<bool>],
    params: &QuantumAgreementParams,
    sizes: FrameSizes,
    channel: &mut C,
    mut coin: K,
    rng: &mut R,
) -> AgreementOutcome {
    let n = reports.len();
    let mut run = QuantumRun::new(reports.to_vec());
    let pairs = session_pairs(n).len() as u64 * params.pairs_per_round as u64;
    let size = sizes.header + sizes.entry;
    let (mut messages, mut bytes, mut sessions) = (0u64, 0u64, 0u64);
    let Some(rounds) = params.draw_rounds(rng) else {
        return AgreementOutcome {
            decisions: vec![None; n],
            rounds: params.max_rounds,
            messages,
            bytes,
            sessions,
        };
    };
    for r in 1..=rounds {
        sessions += pairs;
        let Some(c) = coin(r) else {
            return AgreementOutcome {
                decisions: vec![None; n],
                rounds: r,
                messages,
                bytes,
                sessions,
            };
        };
        let mut heard = vec![false; n * n];
        for from in (0..n).filter(|&j| run.sends(j)) {
            messages += 1;
            bytes += size as u64;
            // one broadcast frame, heard or lost by everyone alike
            let ok = channel.deliver(r as usize, from, usize::MAX, size);
            for to in 0..n {
                heard[from * n + to] = ok;
            }
        }
        let values: Vec<Option<bool>> = (0..n).map(|j| run.value(j)).collect();
        run.round(|j, i| heard[j * n + i], |j, _| values[j], c);
    }
    AgreementOutcome {
        decisions: (0..n).map(|i| run.decide(i)).collect(),
        rounds,
        messages,
        bytes,
        sessions,
    }
}
