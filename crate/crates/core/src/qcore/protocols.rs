use rand::Rng;

use super::{EprKind, Gate, QcoreError, QuantumState};

/// One-to-one output fidelity of a recurrence purification step on two pairs
/// of equal fidelity.
pub fn purify(f_in: f64) -> Result<f64, QcoreError> {
    if !(f_in > 0.0 && f_in <= 1.0) {
        return Err(QcoreError::FidelityRange(f_in));
    }
    let good = f_in * f_in;
    let bad = (1.0 - f_in) * (1.0 - f_in);
    Ok(good / (good + bad))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Correction {
    X,
    Z,
}

#[derive(Debug, Clone)]
pub struct Teleportation {
    /// Register snapshots: the initial three-qubit state, then one per gate.
    pub track_points: Vec<QuantumState>,
    /// Probabilities of outcomes 00, 01, 10, 11 on the two sender qubits.
    pub branch_probabilities: [f64; 4],
    pub outcome: u32,
    /// Receiver state before any correction.
    pub raw: QuantumState,
    /// Corrections in the order they are applied.
    pub corrections: Vec<Correction>,
    pub received: QuantumState,
}

fn circuit(pair: EprKind) -> Result<&'static [Gate], QcoreError> {
    const PHI_PLUS: [Gate; 2] = [Gate::Cnot { control: 0, target: 1 }, Gate::H(0)];
    const PSI_MINUS: [Gate; 7] = [
        Gate::X(1),
        Gate::X(2),
        Gate::H(1),
        Gate::Cnot { control: 1, target: 2 },
        Gate::Cnot { control: 0, target: 1 },
        Gate::H(0),
        Gate::H(2),
    ];
    match pair {
        EprKind::PhiPlus => Ok(&PHI_PLUS),
        EprKind::PsiMinus => Ok(&PSI_MINUS),
        other => Err(QcoreError::UnsupportedPair(other)),
    }
}

fn corrections_for(pair: EprKind, outcome: u32) -> &'static [Correction] {
    use Correction::{X, Z};
    match (pair, outcome) {
        (EprKind::PhiPlus, 0b00) => &[],
        (EprKind::PhiPlus, 0b01) => &[X],
        (EprKind::PhiPlus, 0b10) => &[Z],
        (EprKind::PhiPlus, _) => &[X, Z],
        (_, 0b00) => &[X, Z],
        (_, 0b01) => &[Z],
        (_, 0b10) => &[X],
        // remaining branch only picks up a global phase of pi
        _ => &[],
    }
}

/// Teleports a single-qubit state through `pair`. The sender holds qubits 0
/// (data) and 1, the receiver qubit 2. `forced` pins the measurement outcome.
pub fn teleport_with<R: Rng + ?Sized>(
    data: &QuantumState,
    pair: EprKind,
    forced: Option<u32>,
    rng: &mut R,
) -> Result<Teleportation, QcoreError> {
    if data.n_qubits() != 1 {
        return Err(QcoreError::NotSingleQubit(data.n_qubits()));
    }
    let gates = circuit(pair)?;
    let mut reg = data.tensor(&pair.state())?;
    let mut track_points = vec![reg.clone()];
    // the second X in the Psi- circuit belongs to the same track point
    for (k, gate) in gates.iter().enumerate() {
        reg.apply_mut(*gate)?;
        let merge = pair == EprKind::PsiMinus && k == 0;
        if !merge {
            track_points.push(reg.clone());
        }
    }
    let probs = reg.outcome_probabilities(&[0, 1])?;
    let branch_probabilities = [probs[0], probs[1], probs[2], probs[3]];
    let (outcome, collapsed) = reg.measure(&[0, 1], forced, rng)?;
    let raw = collapsed.last_qubit_given(outcome as usize)?;
    let corrections = corrections_for(pair, outcome).to_vec();
    let mut received = raw.clone();
    for c in &corrections {
        let g = match c {
            Correction::X => Gate::X(0),
            Correction::Z => Gate::Z(0),
        };
        received.apply_mut(g)?;
    }
    Ok(Teleportation {
        track_points,
        branch_probabilities,
        outcome,
        raw,
        corrections,
        received,
    })
}

pub fn teleport<R: Rng + ?Sized>(
    data: &QuantumState,
    pair: EprKind,
    rng: &mut R,
) -> Result<Teleportation, QcoreError> {
    teleport_with(data, pair, None, rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainPlan {
    pub end_fidelity: f64,
    pub pairs_consumed: u64,
    pub purification_rounds: u32,
    /// Fidelity of each elementary link after pumping.
    pub link_fidelities: Vec<f64>,
}

/// End-to-end fidelity of a swapped chain. Link fidelities multiply across
/// swaps; when the product misses the target the weakest link is pumped,
/// doubling the pairs it consumes.
pub fn swap_chain_fidelity(
    link_fidelities: &[f64],
    purify_target: f64,
    max_rounds: u32,
) -> Result<ChainPlan, QcoreError> {
    if link_fidelities.is_empty() {
        return Err(QcoreError::EmptyChain);
    }
    if !(purify_target > 0.5 && purify_target <= 1.0) {
        return Err(QcoreError::TargetRange(purify_target));
    }
    for &f in link_fidelities {
        if !(f > 0.5 && f <= 1.0) {
            return Err(QcoreError::FidelityRange(f));
        }
    }
    let mut fids = link_fidelities.to_vec();
    let mut pairs = vec![1u64; fids.len()];
    let mut rounds = 0u32;
    loop {
        let end: f64 = fids.iter().product();
        if end >= purify_target {
            return Ok(ChainPlan {
                end_fidelity: end,
                pairs_consumed: pairs.iter().sum(),
                purification_rounds: rounds,
                link_fidelities: fids,
            });
        }
        let weakest = fids
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("non-empty");
        let improved = purify(fids[weakest])?;
        if rounds >= max_rounds || improved <= fids[weakest] {
            return Err(QcoreError::Unreachable {
                target: purify_target,
                best: end,
                rounds,
            });
        }
        fids[weakest] = improved;
        pairs[weakest] *= 2;
        rounds += 1;
    }
}
