use num_complex::Complex64;
use serde_json::Value;

use super::{QcoreError, QuantumState, MAX_QUBITS};

const TOL: f64 = 1e-12;

/// Mixed state as a dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: Vec<Complex64>,
    n_qubits: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Per-axis decay rates in 1/s.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DecayRates {
    pub gamma_x: f64,
    pub gamma_y: f64,
    pub gamma_z: f64,
}

impl DecayRates {
    pub fn new(gamma_x: f64, gamma_y: f64, gamma_z: f64) -> Result<Self, QcoreError> {
        for g in [gamma_x, gamma_y, gamma_z] {
            if !(g >= 0.0) || !g.is_finite() {
                return Err(QcoreError::NegativeRate(g));
            }
        }
        Ok(Self {
            gamma_x,
            gamma_y,
            gamma_z,
        })
    }

    pub fn uniform(gamma: f64) -> Result<Self, QcoreError> {
        Self::new(gamma, gamma, gamma)
    }
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, QcoreError> {
        let r2 = x * x + y * y + z * z;
        if !r2.is_finite() || r2 > 1.0 + 1e-9 {
            return Err(QcoreError::BlochLength(r2.sqrt()));
        }
        Ok(Self { x, y, z })
    }

    pub fn length(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

impl DensityMatrix {
    /// Validates hermiticity, unit trace and a non-negative diagonal.
    pub fn new(entries: Vec<Complex64>, n_qubits: usize) -> Result<Self, QcoreError> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(QcoreError::Capacity(n_qubits));
        }
        let dim = 1usize << n_qubits;
        if entries.len() != dim * dim {
            return Err(QcoreError::BadLength(entries.len()));
        }
        let rho = Self { entries, n_qubits };
        for i in 0..dim {
            let d = rho.get(i, i);
            if d.im.abs() > TOL || d.re < -TOL {
                return Err(QcoreError::InvalidDensity("diagonal must be real and non-negative"));
            }
            for j in (i + 1)..dim {
                if (rho.get(i, j) - rho.get(j, i).conj()).norm() > TOL {
                    return Err(QcoreError::InvalidDensity("matrix is not hermitian"));
                }
            }
        }
        if (rho.trace().re - 1.0).abs() > TOL {
            return Err(QcoreError::InvalidDensity("trace is not 1"));
        }
        Ok(rho)
    }

    pub fn from_pure(psi: &QuantumState) -> Self {
        let a = psi.amplitudes();
        let dim = a.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(a[i] * a[j].conj());
            }
        }
        Self {
            entries,
            n_qubits: psi.n_qubits(),
        }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self, QcoreError> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(QcoreError::Capacity(n_qubits));
        }
        let dim = 1usize << n_qubits;
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = Complex64::new(1.0 / dim as f64, 0.0);
        }
        Ok(Self { entries, n_qubits })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.dim() + j]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    /// Tr(rho^2).
    pub fn purity(&self) -> f64 {
        // rho is hermitian, so Tr(rho^2) = sum |rho_ij|^2
        self.entries.iter().map(|e| e.norm_sqr()).sum()
    }

    pub fn is_pure(&self) -> bool {
        (self.purity() - 1.0).abs() < 1e-9
    }

    pub fn to_json(&self) -> Value {
        let dim = self.dim();
        Value::Array(
            (0..dim)
                .map(|i| {
                    Value::Array(
                        (0..dim)
                            .map(|j| {
                                let e = self.get(i, j);
                                serde_json::json!([e.re, e.im])
                            })
                            .collect(),
                    )
                })
                .collect(),
        )
    }
}

pub fn bloch_to_density(v: BlochVector) -> DensityMatrix {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    DensityMatrix {
        entries: vec![
            c(0.5 * (1.0 + v.z), 0.0),
            c(0.5 * v.x, -0.5 * v.y),
            c(0.5 * v.x, 0.5 * v.y),
            c(0.5 * (1.0 - v.z), 0.0),
        ],
        n_qubits: 1,
    }
}

pub fn density_to_bloch(rho: &DensityMatrix) -> Result<BlochVector, QcoreError> {
    if rho.n_qubits != 1 {
        return Err(QcoreError::NotSingleQubit(rho.n_qubits));
    }
    Ok(BlochVector {
        x: 2.0 * rho.get(0, 1).re,
        y: 2.0 * rho.get(1, 0).im,
        z: (rho.get(0, 0) - rho.get(1, 1)).re,
    })
}

/// Exponential Bloch-component decay: each transverse axis shrinks at twice
/// the sum of the other two rates.
pub fn decohere(rho: &DensityMatrix, t: f64, rates: DecayRates) -> Result<DensityMatrix, QcoreError> {
    if !(t >= 0.0) {
        return Err(QcoreError::NegativeTime(t));
    }
    let v = density_to_bloch(rho)?;
    let DecayRates {
        gamma_x,
        gamma_y,
        gamma_z,
    } = rates;
    let decayed = BlochVector {
        x: v.x * (-2.0 * t * (gamma_y + gamma_z)).exp(),
        y: v.y * (-2.0 * t * (gamma_x + gamma_z)).exp(),
        z: v.z * (-2.0 * t * (gamma_x + gamma_y)).exp(),
    };
    Ok(bloch_to_density(decayed))
}

/// `<psi|rho|psi>`.
pub fn fidelity(psi: &QuantumState, rho: &DensityMatrix) -> Result<f64, QcoreError> {
    if psi.n_qubits() != rho.n_qubits {
        return Err(QcoreError::DimensionMismatch {
            state: psi.n_qubits(),
            rho: rho.n_qubits,
        });
    }
    let a = psi.amplitudes();
    let dim = a.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..dim {
        for j in 0..dim {
            acc += a[i].conj() * rho.get(i, j) * a[j];
        }
    }
    Ok(acc.re)
}
