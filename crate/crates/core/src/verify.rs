//! Built-in analytic checks of the quantum math and the routing solver.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::engine::{substream, StreamKind};
use crate::qcore::{
    bloch_to_density, decohere, density_to_bloch, fidelity, purify, teleport_with, BlochVector,
    DecayRates, DensityMatrix, EprKind, QuantumState,
};
use crate::ralgebra::{
    best_path, enumerate_paths_oracle, oracle_best, LinkLabel, NodeId, QuantumLink,
    QuantumTopology,
};

const TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub category: &'static str,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Deliberate faults for mutation testing of the suite itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct Perturbation {
    /// Added to every purification output.
    pub purify_offset: f64,
}

struct Suite {
    checks: Vec<Check>,
}

impl Suite {
    fn add(&mut self, category: &'static str, name: impl Into<String>, passed: bool, detail: String) {
        self.checks.push(Check {
            category,
            name: name.into(),
            passed,
            detail,
        });
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Statevector built from `(scale, [(coefficient, basis bits)])`.
fn expr(scale: f64, terms: &[(Complex64, &str)]) -> Vec<Complex64> {
    let mut v = vec![c(0.0); 8];
    for (coef, bits) in terms {
        let idx = usize::from_str_radix(bits, 2).expect("basis label");
        v[idx] += coef * scale;
    }
    v
}

/// Hand-expanded register states at every track point of the two
/// teleportation examples, for data `a|0> + b|1>`.
pub fn expected_track_points(pair: EprKind, a: Complex64, b: Complex64) -> Vec<Vec<Complex64>> {
    let r2 = std::f64::consts::FRAC_1_SQRT_2;
    match pair {
        EprKind::PhiPlus => vec![
            expr(r2, &[(a, "000"), (a, "011"), (b, "100"), (b, "111")]),
            expr(r2, &[(a, "000"), (a, "011"), (b, "110"), (b, "101")]),
            expr(
                0.5,
                &[
                    (a, "000"),
                    (a, "100"),
                    (a, "011"),
                    (a, "111"),
                    (b, "010"),
                    (-b, "110"),
                    (b, "001"),
                    (-b, "101"),
                ],
            ),
        ],
        EprKind::PsiMinus => vec![
            expr(r2, &[(a, "001"), (-a, "010"), (b, "101"), (-b, "110")]),
            expr(r2, &[(a, "010"), (-a, "001"), (b, "110"), (-b, "101")]),
            expr(
                0.5,
                &[
                    (a, "000"),
                    (-a, "010"),
                    (-a, "001"),
                    (-a, "011"),
                    (b, "100"),
                    (-b, "110"),
                    (-b, "101"),
                    (-b, "111"),
                ],
            ),
            expr(
                0.5,
                &[
                    (a, "000"),
                    (-a, "011"),
                    (-a, "001"),
                    (-a, "010"),
                    (b, "100"),
                    (-b, "111"),
                    (-b, "101"),
                    (-b, "110"),
                ],
            ),
            expr(
                0.5,
                &[
                    (a, "000"),
                    (-a, "011"),
                    (-a, "001"),
                    (-a, "010"),
                    (b, "110"),
                    (-b, "101"),
                    (-b, "111"),
                    (-b, "100"),
                ],
            ),
            // after the Hadamard on the data qubit, written out term by term
            expr(
                0.5 * r2,
                &[
                    (a, "000"),
                    (a, "100"),
                    (-a, "011"),
                    (-a, "111"),
                    (-a, "001"),
                    (-a, "101"),
                    (-a, "010"),
                    (-a, "110"),
                    (b, "010"),
                    (-b, "110"),
                    (-b, "001"),
                    (b, "101"),
                    (-b, "011"),
                    (b, "111"),
                    (-b, "000"),
                    (b, "100"),
                ],
            ),
            expr(
                0.5,
                &[
                    (-b, "000"),
                    (a, "001"),
                    (-a, "010"),
                    (b, "011"),
                    (b, "100"),
                    (a, "101"),
                    (-a, "110"),
                    (-b, "111"),
                ],
            ),
        ],
        _ => Vec::new(),
    }
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn teleport_checks(s: &mut Suite, samples: usize) {
    let mut rng = substream(0, StreamKind::Test, 1, 0);
    for pair in [EprKind::PhiPlus, EprKind::PsiMinus] {
        let mut worst_fid = 0.0f64;
        let mut worst_prob = 0.0f64;
        let mut errors = 0;
        for _ in 0..samples {
            let data = QuantumState::random_qubit(&mut rng);
            for outcome in 0..4u32 {
                match teleport_with(&data, pair, Some(outcome), &mut rng) {
                    Ok(t) => {
                        let f = t.received.overlap(&data).unwrap_or(0.0);
                        worst_fid = worst_fid.max((1.0 - f).abs());
                        for p in t.branch_probabilities {
                            worst_prob = worst_prob.max((p - 0.25).abs());
                        }
                    }
                    Err(_) => errors += 1,
                }
            }
        }
        s.add(
            "teleport",
            format!("{pair:?} corrections restore the data"),
            errors == 0 && worst_fid <= TOL,
            format!("{samples} states x 4 branches, max |1-F| = {worst_fid:.2e}"),
        );
        s.add(
            "teleport",
            format!("{pair:?} branches equiprobable"),
            errors == 0 && worst_prob <= TOL,
            format!("max |p-1/4| = {worst_prob:.2e}"),
        );

        let (a, b) = (c(3f64.sqrt() / 2.0), c(0.5));
        let data = QuantumState::qubit(a, b).expect("normalized");
        let expected = expected_track_points(pair, a, b);
        match teleport_with(&data, pair, Some(0), &mut rng) {
            Ok(t) => {
                let sim = &t.track_points;
                let ok_len = sim.len() == expected.len();
                let worst = sim
                    .iter()
                    .zip(&expected)
                    .map(|(st, p)| max_diff(st.amplitudes(), p))
                    .fold(0.0, f64::max);
                s.add(
                    "teleport",
                    format!("{pair:?} track points match the worked example"),
                    ok_len && worst <= TOL,
                    format!("{} points, max deviation {worst:.2e}", expected.len()),
                );
            }
            Err(e) => s.add("teleport", format!("{pair:?} track points"), false, e.to_string()),
        }
    }
}

fn purify_checks(s: &mut Suite, p: &Perturbation) {
    let pur = |f: f64| purify(f).map(|v| v + p.purify_offset).unwrap_or(f64::NAN);
    let v = pur(0.8);
    s.add(
        "purify",
        "two pairs at 0.8",
        (v - 0.9411764705882353).abs() <= TOL,
        format!("got {v:.16}"),
    );
    let (h, one) = (pur(0.5), pur(1.0));
    s.add(
        "purify",
        "fixed points 0.5 and 1",
        h == 0.5 && one == 1.0,
        format!("purify(0.5) = {h}, purify(1) = {one}"),
    );
    let grid: Vec<f64> = (1..=1000).map(|i| i as f64 / 1000.0).map(pur).collect();
    let monotone = grid.windows(2).all(|w| w[1] > w[0]);
    s.add("purify", "strictly increasing", monotone, "1000-point grid on (0,1]".into());
}

fn bloch_checks(s: &mut Suite) {
    let h = 0.5;
    let rows: [(&str, [f64; 3], [Complex64; 4]); 6] = [
        ("|+>", [1.0, 0.0, 0.0], [c(h), c(h), c(h), c(h)]),
        ("|->", [-1.0, 0.0, 0.0], [c(h), c(-h), c(-h), c(h)]),
        (
            "|pi/2>",
            [0.0, 1.0, 0.0],
            [c(h), Complex64::new(0.0, -h), Complex64::new(0.0, h), c(h)],
        ),
        (
            "|-pi/2>",
            [0.0, -1.0, 0.0],
            [c(h), Complex64::new(0.0, h), Complex64::new(0.0, -h), c(h)],
        ),
        ("|0>", [0.0, 0.0, 1.0], [c(1.0), c(0.0), c(0.0), c(0.0)]),
        ("|1>", [0.0, 0.0, -1.0], [c(0.0), c(0.0), c(0.0), c(1.0)]),
    ];
    for (name, [x, y, z], rho) in rows {
        let v = BlochVector { x, y, z };
        let m = bloch_to_density(v);
        let d = max_diff(m.entries(), &rho);
        let back = density_to_bloch(&m).map(|b| (b.x - x).abs().max((b.y - y).abs()).max((b.z - z).abs()));
        let ok = d <= TOL && back.as_ref().is_ok_and(|e| *e <= TOL) && m.is_pure();
        s.add(
            "bloch",
            format!("{name} row round-trips"),
            ok,
            format!("matrix deviation {d:.2e}"),
        );
    }
}

fn decoherence_checks(s: &mut Suite) {
    let v0 = BlochVector {
        x: 0.6,
        y: -0.3,
        z: 0.5,
    };
    let rho0 = bloch_to_density(v0);
    let mut worst = 0.0f64;
    let mut trace_err = 0.0f64;
    let mut monotone = true;
    for gamma in [[1e-3, 2e-3, 5e-4], [0.0, 0.1, 0.1], [1.0, 1.0, 1.0]] {
        let rates = DecayRates::new(gamma[0], gamma[1], gamma[2]).expect("rates");
        let mut last = rho0.purity();
        for t in [0.0, 0.01, 0.1, 1.0, 10.0, 100.0, 1e4] {
            let r = decohere(&rho0, t, rates).expect("valid");
            let ex = (-2.0 * t * (gamma[1] + gamma[2])).exp();
            let ey = (-2.0 * t * (gamma[0] + gamma[2])).exp();
            let ez = (-2.0 * t * (gamma[0] + gamma[1])).exp();
            let closed = [
                c(0.5 * (1.0 + v0.z * ez)),
                Complex64::new(0.5 * v0.x * ex, -0.5 * v0.y * ey),
                Complex64::new(0.5 * v0.x * ex, 0.5 * v0.y * ey),
                c(0.5 * (1.0 - v0.z * ez)),
            ];
            worst = worst.max(max_diff(r.entries(), &closed));
            trace_err = trace_err.max((r.trace() - c(1.0)).norm());
            let p = r.purity();
            monotone &= p <= last + TOL;
            last = p;
        }
    }
    s.add(
        "decoherence",
        "matches the closed-form matrix",
        worst <= TOL,
        format!("max deviation {worst:.2e}"),
    );
    s.add(
        "decoherence",
        "trace preserved, purity non-increasing",
        trace_err <= TOL && monotone,
        format!("max trace error {trace_err:.2e}"),
    );
}

fn fidelity_checks(s: &mut Suite) {
    let mut rng = substream(0, StreamKind::Test, 2, 0);
    let psi = QuantumState::random_qubit(&mut rng);
    let pure = fidelity(&psi, &DensityMatrix::from_pure(&psi)).unwrap_or(f64::NAN);
    s.add(
        "fidelity",
        "pure state has fidelity 1",
        (pure - 1.0).abs() <= TOL,
        format!("F = {pure}"),
    );
    for n in 1..=4usize {
        let dim = 1usize << n;
        let amps: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let psi = QuantumState::normalized(amps).expect("non-zero");
        let f = DensityMatrix::maximally_mixed(n)
            .and_then(|m| fidelity(&psi, &m))
            .unwrap_or(f64::NAN);
        let want = 1.0 / dim as f64;
        s.add(
            "fidelity",
            format!("{n}-qubit maximally mixed gives 2^-{n}"),
            (f - want).abs() <= TOL,
            format!("F = {f}"),
        );
    }
}

fn random_topology<R: Rng + ?Sized>(rng: &mut R, nodes: u32) -> QuantumTopology {
    let mut links = Vec::new();
    for a in 0..nodes {
        for b in 0..nodes {
            if a != b && rng.random::<f64>() < 0.35 {
                let label = LinkLabel::new(
                    (1 + rng.random_range(0..5u32)) as f64,
                    rng.random_range(0..4u32) as f64,
                )
                .expect("valid label");
                links.push(QuantumLink {
                    from: NodeId(a),
                    to: NodeId(b),
                    label,
                });
            }
        }
    }
    QuantumTopology::new((0..nodes).map(NodeId), links).expect("valid topology")
}

fn routing_checks(s: &mut Suite, graphs: usize) {
    let mut rng = substream(0, StreamKind::Test, 3, 0);
    let mut mismatches = 0;
    let mut compared = 0;
    for _ in 0..graphs {
        let n = rng.random_range(2..=10u32);
        let topo = random_topology(&mut rng, n);
        let (src, dst) = (NodeId(0), NodeId(n - 1));
        let solver = best_path(&topo, src, dst).ok();
        let oracle = enumerate_paths_oracle(&topo, src, dst)
            .ok()
            .and_then(|all| oracle_best(&all).cloned());
        compared += 1;
        match (solver, oracle) {
            (None, None) => {}
            (Some(a), Some(b)) if a.signature == b.signature => {}
            _ => mismatches += 1,
        }
    }
    s.add(
        "routing",
        "solver agrees with exhaustive enumeration",
        mismatches == 0,
        format!("{compared} random graphs, {mismatches} mismatches"),
    );
}

pub fn run_checks(p: &Perturbation) -> Vec<Check> {
    let mut s = Suite { checks: Vec::new() };
    teleport_checks(&mut s, 250);
    purify_checks(&mut s, p);
    bloch_checks(&mut s);
    decoherence_checks(&mut s);
    fidelity_checks(&mut s);
    routing_checks(&mut s, 200);
    s.checks
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}

pub fn render(checks: &[Check]) -> String {
    let mut out = String::new();
    for c in checks {
        let _ = writeln!(
            out,
            "{} [{}] {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.category,
            c.name,
            c.detail
        );
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    let _ = writeln!(out, "{} checks, {} failed", checks.len(), failed);
    out
}
