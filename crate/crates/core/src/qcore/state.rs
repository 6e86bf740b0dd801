use num_complex::Complex64;
use rand::Rng;
use serde_json::Value;

use super::QcoreError;

pub const MAX_QUBITS: usize = 4;
const NORM_TOL: f64 = 1e-12;

/// Pure state of up to four qubits. Qubit 0 is the most significant bit of
/// the basis index, so `|q0 q1 q2>` maps to index `q0*4 + q1*2 + q2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    amps: Vec<Complex64>,
    n_qubits: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    H(usize),
    X(usize),
    Z(usize),
    Cnot { control: usize, target: usize },
}

/// The four maximally entangled two-qubit states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EprKind {
    PsiPlus,
    PsiMinus,
    PhiPlus,
    PhiMinus,
}

impl EprKind {
    pub const ALL: [EprKind; 4] = [
        EprKind::PsiPlus,
        EprKind::PsiMinus,
        EprKind::PhiPlus,
        EprKind::PhiMinus,
    ];

    pub fn state(self) -> QuantumState {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let amps = match self {
            EprKind::PhiPlus => [h, 0.0, 0.0, h],
            EprKind::PhiMinus => [h, 0.0, 0.0, -h],
            EprKind::PsiPlus => [0.0, h, h, 0.0],
            EprKind::PsiMinus => [0.0, h, -h, 0.0],
        };
        QuantumState {
            amps: amps.iter().map(|&a| Complex64::new(a, 0.0)).collect(),
            n_qubits: 2,
        }
    }

    /// True when both halves give the same outcome in the computational basis.
    pub fn z_correlated(self) -> bool {
        matches!(self, EprKind::PhiPlus | EprKind::PhiMinus)
    }
}

impl QuantumState {
    pub fn new(amps: Vec<Complex64>) -> Result<Self, QcoreError> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(QcoreError::BadLength(len));
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(QcoreError::Capacity(n_qubits));
        }
        let s = Self { amps, n_qubits };
        let norm = s.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(QcoreError::NotNormalized(norm));
        }
        Ok(s)
    }

    /// Builds a state and rescales it to unit norm.
    pub fn normalized(amps: Vec<Complex64>) -> Result<Self, QcoreError> {
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(QcoreError::NotNormalized(norm));
        }
        Self::new(amps.into_iter().map(|a| a / norm).collect())
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self, QcoreError> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(QcoreError::Capacity(n_qubits));
        }
        let dim = 1 << n_qubits;
        if index >= dim {
            return Err(QcoreError::QubitIndex { index, n: n_qubits });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { amps, n_qubits })
    }

    /// `alpha|0> + beta|1>`.
    pub fn qubit(alpha: Complex64, beta: Complex64) -> Result<Self, QcoreError> {
        Self::new(vec![alpha, beta])
    }

    /// Haar-random single qubit.
    pub fn random_qubit<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let theta = (1.0 - 2.0 * rng.random::<f64>()).acos();
        let phi = std::f64::consts::TAU * rng.random::<f64>();
        let alpha = Complex64::new((theta / 2.0).cos(), 0.0);
        let beta = Complex64::from_polar((theta / 2.0).sin(), phi);
        Self::normalized(vec![alpha, beta]).expect("unit by construction")
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &QuantumState) -> Result<Complex64, QcoreError> {
        if self.n_qubits != other.n_qubits {
            return Err(QcoreError::DimensionMismatch {
                state: self.n_qubits,
                rho: other.n_qubits,
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|<self|other>|^2`, which ignores global phase.
    pub fn overlap(&self, other: &QuantumState) -> Result<f64, QcoreError> {
        Ok(self.inner(other)?.norm_sqr())
    }

    pub fn tensor(&self, other: &QuantumState) -> Result<QuantumState, QcoreError> {
        let n = self.n_qubits + other.n_qubits;
        if n > MAX_QUBITS {
            return Err(QcoreError::Capacity(n));
        }
        let mut amps = Vec::with_capacity(1 << n);
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ok(QuantumState { amps, n_qubits: n })
    }

    fn bit(&self, qubit: usize) -> usize {
        1 << (self.n_qubits - 1 - qubit)
    }

    fn check_qubit(&self, q: usize) -> Result<(), QcoreError> {
        if q >= self.n_qubits {
            Err(QcoreError::QubitIndex {
                index: q,
                n: self.n_qubits,
            })
        } else {
            Ok(())
        }
    }

    pub fn apply(&self, gate: Gate) -> Result<QuantumState, QcoreError> {
        let mut out = self.clone();
        out.apply_mut(gate)?;
        Ok(out)
    }

    pub fn apply_mut(&mut self, gate: Gate) -> Result<(), QcoreError> {
        match gate {
            Gate::H(q) => {
                self.check_qubit(q)?;
                let m = self.bit(q);
                let h = std::f64::consts::FRAC_1_SQRT_2;
                for i in 0..self.amps.len() {
                    if i & m == 0 {
                        let (a, b) = (self.amps[i], self.amps[i | m]);
                        self.amps[i] = (a + b) * h;
                        self.amps[i | m] = (a - b) * h;
                    }
                }
            }
            Gate::X(q) => {
                self.check_qubit(q)?;
                let m = self.bit(q);
                for i in 0..self.amps.len() {
                    if i & m == 0 {
                        self.amps.swap(i, i | m);
                    }
                }
            }
            Gate::Z(q) => {
                self.check_qubit(q)?;
                let m = self.bit(q);
                for (i, a) in self.amps.iter_mut().enumerate() {
                    if i & m != 0 {
                        *a = -*a;
                    }
                }
            }
            Gate::Cnot { control, target } => {
                self.check_qubit(control)?;
                self.check_qubit(target)?;
                if control == target {
                    return Err(QcoreError::DuplicateTarget);
                }
                let (c, t) = (self.bit(control), self.bit(target));
                for i in 0..self.amps.len() {
                    if i & c != 0 && i & t == 0 {
                        self.amps.swap(i, i | t);
                    }
                }
            }
        }
        Ok(())
    }

    fn outcome_of(&self, index: usize, qubits: &[usize]) -> u32 {
        qubits
            .iter()
            .fold(0u32, |acc, &q| (acc << 1) | ((index & self.bit(q) != 0) as u32))
    }

    fn check_measured(&self, qubits: &[usize]) -> Result<(), QcoreError> {
        for (k, &q) in qubits.iter().enumerate() {
            self.check_qubit(q)?;
            if qubits[..k].contains(&q) {
                return Err(QcoreError::DuplicateTarget);
            }
        }
        Ok(())
    }

    /// Born probabilities of every outcome of measuring `qubits`; the first
    /// listed qubit is the most significant outcome bit.
    pub fn outcome_probabilities(&self, qubits: &[usize]) -> Result<Vec<f64>, QcoreError> {
        self.check_measured(qubits)?;
        let mut probs = vec![0.0; 1 << qubits.len()];
        for (i, a) in self.amps.iter().enumerate() {
            probs[self.outcome_of(i, qubits) as usize] += a.norm_sqr();
        }
        Ok(probs)
    }

    /// Projective measurement in the computational basis. `forced` injects an
    /// outcome instead of sampling one.
    pub fn measure<R: Rng + ?Sized>(
        &self,
        qubits: &[usize],
        forced: Option<u32>,
        rng: &mut R,
    ) -> Result<(u32, QuantumState), QcoreError> {
        let probs = self.outcome_probabilities(qubits)?;
        let outcome = match forced {
            Some(o) => {
                if o as usize >= probs.len() || probs[o as usize] <= NORM_TOL {
                    return Err(QcoreError::ImpossibleOutcome(o));
                }
                o
            }
            None => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = probs.len() - 1;
                for (o, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc && *p > 0.0 {
                        pick = o;
                        break;
                    }
                }
                while probs[pick] == 0.0 {
                    pick -= 1;
                }
                pick as u32
            }
        };
        let scale = probs[outcome as usize].sqrt();
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| {
                if self.outcome_of(i, qubits) == outcome {
                    a / scale
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        Ok((
            outcome,
            QuantumState {
                amps,
                n_qubits: self.n_qubits,
            },
        ))
    }

    /// State of the last qubit given that every other qubit sits in the basis
    /// state encoded by `prefix`. Requires a product form, as after measuring
    /// all the other qubits.
    pub fn last_qubit_given(&self, prefix: usize) -> Result<QuantumState, QcoreError> {
        let base = prefix << 1;
        if base + 1 >= self.amps.len() {
            return Err(QcoreError::QubitIndex {
                index: prefix,
                n: self.n_qubits,
            });
        }
        QuantumState::normalized(vec![self.amps[base], self.amps[base + 1]])
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.amps
                .iter()
                .map(|a| serde_json::json!([a.re, a.im]))
                .collect(),
        )
    }
}
