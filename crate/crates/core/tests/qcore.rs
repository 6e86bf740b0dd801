use num_complex::Complex64;
use proptest::prelude::*;
use qtrust::engine::{substream, StreamKind};
use qtrust::qcore::{
    bloch_to_density, decohere, density_to_bloch, fidelity, purify, swap_chain_fidelity, teleport,
    teleport_with, BlochVector, DecayRates, DensityMatrix, EprKind, Gate, QcoreError, QuantumState,
};

const TOL: f64 = 1e-12;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rng() -> rand_chacha::ChaCha8Rng {
    substream(7, StreamKind::Test, 0, 0)
}

#[test]
fn basis_index_puts_qubit_zero_first() {
    // |100> for three qubits is index 4
    let s = QuantumState::basis(3, 4).unwrap();
    let x = QuantumState::basis(3, 0).unwrap().apply(Gate::X(0)).unwrap();
    assert_eq!(s, x);
}

#[test]
fn rejects_unnormalized_and_oversized_registers() {
    assert!(matches!(
        QuantumState::new(vec![c(1.0, 0.0), c(1.0, 0.0)]),
        Err(QcoreError::NotNormalized(_))
    ));
    assert!(matches!(
        QuantumState::new(vec![c(1.0, 0.0); 3]),
        Err(QcoreError::BadLength(3))
    ));
    assert!(QuantumState::basis(5, 0).is_err());
    let s = QuantumState::basis(2, 0).unwrap();
    assert!(matches!(s.apply(Gate::H(2)), Err(QcoreError::QubitIndex { .. })));
    assert!(matches!(
        s.apply(Gate::Cnot {
            control: 1,
            target: 1
        }),
        Err(QcoreError::DuplicateTarget)
    ));
}

#[test]
fn bell_states_are_normalized_and_orthogonal() {
    for a in EprKind::ALL {
        assert!((a.state().norm_sqr() - 1.0).abs() < TOL);
        for b in EprKind::ALL {
            let o = a.state().overlap(&b.state()).unwrap();
            let want = if a == b { 1.0 } else { 0.0 };
            assert!((o - want).abs() < TOL, "{a:?} {b:?}");
        }
    }
}

#[test]
fn teleportation_is_exact_on_every_branch() {
    let mut r = rng();
    for pair in [EprKind::PhiPlus, EprKind::PsiMinus] {
        for _ in 0..200 {
            let data = QuantumState::random_qubit(&mut r);
            for branch in 0..4 {
                let t = teleport_with(&data, pair, Some(branch), &mut r).unwrap();
                assert_eq!(t.outcome, branch);
                assert!((t.received.overlap(&data).unwrap() - 1.0).abs() < TOL);
                for p in t.branch_probabilities {
                    assert!((p - 0.25).abs() < TOL);
                }
            }
        }
    }
}

#[test]
fn teleportation_without_a_circuit_is_an_error() {
    let data = QuantumState::basis(1, 0).unwrap();
    assert!(matches!(
        teleport(&data, EprKind::PsiPlus, &mut rng()),
        Err(QcoreError::UnsupportedPair(EprKind::PsiPlus))
    ));
    let two = QuantumState::basis(2, 0).unwrap();
    assert!(teleport(&two, EprKind::PhiPlus, &mut rng()).is_err());
}

#[test]
fn purification_anchor_and_fixed_points() {
    assert!((purify(0.8).unwrap() - 0.9411764705882353).abs() < TOL);
    assert_eq!(purify(0.5).unwrap(), 0.5);
    assert_eq!(purify(1.0).unwrap(), 1.0);
    assert!(purify(0.0).is_err());
    assert!(purify(1.5).is_err());
}

#[test]
fn purification_is_monotone_on_a_grid() {
    let mut prev = purify(1e-3).unwrap();
    for i in 2..=1000 {
        let f = i as f64 / 1000.0;
        let next = purify(f).unwrap();
        assert!(next > prev, "not increasing at {f}");
        prev = next;
    }
}

#[test]
fn fidelity_anchors() {
    let plus = QuantumState::qubit(c(0.5f64.sqrt(), 0.0), c(0.5f64.sqrt(), 0.0)).unwrap();
    let pure = DensityMatrix::from_pure(&plus);
    assert!((fidelity(&plus, &pure).unwrap() - 1.0).abs() < TOL);
    for n in 1..=4 {
        let mixed = DensityMatrix::maximally_mixed(n).unwrap();
        let psi = QuantumState::basis(n, 0).unwrap();
        let want = 0.5f64.powi(n as i32);
        assert!((fidelity(&psi, &mixed).unwrap() - want).abs() < TOL);
    }
    let two = QuantumState::basis(2, 0).unwrap();
    assert!(fidelity(&two, &pure).is_err());
}

fn table_rows() -> Vec<(BlochVector, [Complex64; 4])> {
    let h = 0.5;
    vec![
        (BlochVector::new(1.0, 0.0, 0.0).unwrap(), [c(h, 0.0), c(h, 0.0), c(h, 0.0), c(h, 0.0)]),
        (BlochVector::new(-1.0, 0.0, 0.0).unwrap(), [c(h, 0.0), c(-h, 0.0), c(-h, 0.0), c(h, 0.0)]),
        (BlochVector::new(0.0, 1.0, 0.0).unwrap(), [c(h, 0.0), c(0.0, -h), c(0.0, h), c(h, 0.0)]),
        (BlochVector::new(0.0, -1.0, 0.0).unwrap(), [c(h, 0.0), c(0.0, h), c(0.0, -h), c(h, 0.0)]),
        (BlochVector::new(0.0, 0.0, 1.0).unwrap(), [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]),
        (BlochVector::new(0.0, 0.0, -1.0).unwrap(), [c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]),
    ]
}

#[test]
fn bloch_table_round_trips() {
    for (v, rho) in table_rows() {
        let got = bloch_to_density(v);
        for (a, b) in got.entries().iter().zip(rho) {
            assert!((a - b).norm() < TOL);
        }
        let back = density_to_bloch(&got).unwrap();
        assert!((back.x - v.x).abs() < TOL && (back.y - v.y).abs() < TOL && (back.z - v.z).abs() < TOL);
    }
}

#[test]
fn bloch_vector_longer_than_one_is_rejected() {
    assert!(matches!(
        BlochVector::new(1.0, 1.0, 0.0),
        Err(QcoreError::BlochLength(_))
    ));
}

#[test]
fn decoherence_matches_closed_form() {
    let v0 = BlochVector::new(0.6, -0.3, 0.5).unwrap();
    let rho0 = bloch_to_density(v0);
    for &(gx, gy, gz) in &[(0.1, 0.2, 0.3), (1e-3, 0.0, 5e-3), (0.0, 0.0, 0.0), (2.0, 1.0, 0.5)] {
        let rates = DecayRates::new(gx, gy, gz).unwrap();
        for &t in &[0.0, 0.01, 0.5, 1.0, 3.0, 10.0] {
            let rho = decohere(&rho0, t, rates).unwrap();
            let ex = (-2.0 * t * (gy + gz)).exp();
            let ey = (-2.0 * t * (gx + gz)).exp();
            let ez = (-2.0 * t * (gx + gy)).exp();
            let want = [
                c(0.5 * (1.0 + v0.z * ez), 0.0),
                c(0.5 * v0.x * ex, -0.5 * v0.y * ey),
                c(0.5 * v0.x * ex, 0.5 * v0.y * ey),
                c(0.5 * (1.0 - v0.z * ez), 0.0),
            ];
            for (a, b) in rho.entries().iter().zip(want) {
                assert!((a - b).norm() < TOL, "t={t} rates=({gx},{gy},{gz})");
            }
        }
    }
    assert!(decohere(&rho0, -1.0, DecayRates::uniform(0.1).unwrap()).is_err());
    assert!(DecayRates::new(-0.1, 0.0, 0.0).is_err());
}

#[test]
fn swap_chain_multiplies_and_pumps_the_weakest_link() {
    let plan = swap_chain_fidelity(&[0.99, 0.98], 0.9, 4).unwrap();
    assert_eq!(plan.purification_rounds, 0);
    assert!((plan.end_fidelity - 0.99 * 0.98).abs() < TOL);
    assert_eq!(plan.pairs_consumed, 2);

    let plan = swap_chain_fidelity(&[0.97, 0.8], 0.9, 4).unwrap();
    assert_eq!(plan.purification_rounds, 1);
    assert!((plan.link_fidelities[1] - purify(0.8).unwrap()).abs() < TOL);
    assert_eq!(plan.pairs_consumed, 3);

    assert!(matches!(
        swap_chain_fidelity(&[0.6; 6], 0.99, 1),
        Err(QcoreError::Unreachable { .. })
    ));
    assert!(matches!(swap_chain_fidelity(&[], 0.9, 1), Err(QcoreError::EmptyChain)));
}

#[test]
fn measurement_statistics_follow_the_amplitudes() {
    let s = QuantumState::qubit(c(0.6, 0.0), c(0.8, 0.0)).unwrap();
    let mut r = rng();
    let trials = 20_000;
    let ones = (0..trials)
        .filter(|_| s.measure(&[0], None, &mut r).unwrap().0 == 1)
        .count();
    let p = ones as f64 / trials as f64;
    // 0.64 with five standard errors of slack
    assert!((p - 0.64).abs() < 5.0 * (0.64f64 * 0.36 / trials as f64).sqrt());
}

fn bloch_strategy() -> impl Strategy<Value = BlochVector> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0).prop_filter_map("inside the ball", |(x, y, z)| {
        BlochVector::new(x, y, z).ok()
    })
}

proptest! {
    #[test]
    fn gates_preserve_the_norm(seed in any::<u64>(), gates in prop::collection::vec(0usize..12, 0..24)) {
        let mut r = substream(seed, StreamKind::Test, 1, 0);
        let q = QuantumState::random_qubit(&mut r);
        let mut s = q.tensor(&EprKind::PhiPlus.state()).unwrap();
        for g in gates {
            let gate = match g {
                0..=2 => Gate::H(g),
                3..=5 => Gate::X(g - 3),
                6..=8 => Gate::Z(g - 6),
                9 => Gate::Cnot { control: 0, target: 1 },
                10 => Gate::Cnot { control: 1, target: 2 },
                _ => Gate::Cnot { control: 2, target: 0 },
            };
            s.apply_mut(gate).unwrap();
        }
        prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bloch_round_trip_is_exact(v in bloch_strategy()) {
        let back = density_to_bloch(&bloch_to_density(v)).unwrap();
        prop_assert!((back.x - v.x).abs() < 1e-12);
        prop_assert!((back.y - v.y).abs() < 1e-12);
        prop_assert!((back.z - v.z).abs() < 1e-12);
    }

    #[test]
    fn decoherence_keeps_trace_and_never_gains_purity(
        v in bloch_strategy(),
        g in (0.0f64..2.0, 0.0f64..2.0, 0.0f64..2.0),
        t1 in 0.0f64..5.0,
        dt in 0.0f64..5.0,
    ) {
        let rates = DecayRates::new(g.0, g.1, g.2).unwrap();
        let rho = bloch_to_density(v);
        let a = decohere(&rho, t1, rates).unwrap();
        let b = decohere(&rho, t1 + dt, rates).unwrap();
        prop_assert!((a.trace().re - 1.0).abs() < 1e-12);
        prop_assert!(a.trace().im.abs() < 1e-12);
        prop_assert!(b.purity() <= a.purity() + 1e-12);
        prop_assert!(a.purity() <= rho.purity() + 1e-12);
    }

    #[test]
    fn purification_improves_anything_above_one_half(f in 0.5001f64..0.9999) {
        let p = purify(f).unwrap();
        prop_assert!(p > f && p <= 1.0);
    }

    #[test]
    fn random_teleport_returns_the_input(seed in any::<u64>(), psi_minus in any::<bool>()) {
        let mut r = substream(seed, StreamKind::Test, 2, 0);
        let q = QuantumState::random_qubit(&mut r);
        let pair = if psi_minus { EprKind::PsiMinus } else { EprKind::PhiPlus };
        let t = teleport(&q, pair, &mut r).unwrap();
        prop_assert!((t.received.overlap(&q).unwrap() - 1.0).abs() < 1e-12);
    }
}
