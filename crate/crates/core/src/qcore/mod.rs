//! Small exact quantum-state math: pure states up to four qubits, single-qubit
//! density matrices, decoherence, fidelity, teleportation and purification.

mod density;
mod protocols;
mod state;

pub use density::{
    bloch_to_density, decohere, density_to_bloch, fidelity, BlochVector, DecayRates,
    DensityMatrix,
};
pub use protocols::{
    purify, swap_chain_fidelity, teleport, teleport_with, ChainPlan, Correction, Teleportation,
};
pub use state::{EprKind, Gate, QuantumState, MAX_QUBITS};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QcoreError {
    #[error("{0} qubits exceed the capacity of {MAX_QUBITS}")]
    Capacity(usize),
    #[error("qubit index {index} out of range for a {n}-qubit register")]
    QubitIndex { index: usize, n: usize },
    #[error("gate or measurement targets must be distinct")]
    DuplicateTarget,
    #[error("amplitude or entry count {0} does not describe a register")]
    BadLength(usize),
    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),
    #[error("operation needs one qubit, got {0}")]
    NotSingleQubit(usize),
    #[error("state has {state} qubits but the density matrix has {rho}")]
    DimensionMismatch { state: usize, rho: usize },
    #[error("invalid density matrix: {0}")]
    InvalidDensity(&'static str),
    #[error("Bloch vector length {0} exceeds 1")]
    BlochLength(f64),
    #[error("negative evolution time {0}")]
    NegativeTime(f64),
    #[error("decay rate {0} must be finite and non-negative")]
    NegativeRate(f64),
    #[error("forced outcome {0} has zero probability")]
    ImpossibleOutcome(u32),
    #[error("fidelity {0} outside the accepted range")]
    FidelityRange(f64),
    #[error("purification target {0} outside (0.5, 1]")]
    TargetRange(f64),
    #[error("no teleportation circuit for {0:?}")]
    UnsupportedPair(EprKind),
    #[error("swap chain has no links")]
    EmptyChain,
    #[error("target fidelity {target} unreachable after {rounds} purification rounds (best {best})")]
    Unreachable { target: f64, best: f64, rounds: u32 },
}
