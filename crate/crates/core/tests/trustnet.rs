use proptest::prelude::*;
use qtrust::engine::{substream, StreamKind};
use qtrust::trustnet::eig::run_general;
use qtrust::trustnet::{
    classical_agreement, f_max, quantum_agreement, sense, session_pairs, Behavior,
    ByzantineProfile, ClassicalRun, FaultKind, FrameSizes, OperationMode, PerfectChannel,
    QuantumAgreementParams, QuantumRun, Reading, Sensed, TrustLedger, TrustParams,
};
use rand::seq::SliceRandom;
use rand::Rng;

fn faulty_members<R: Rng>(n: usize, k: usize, rng: &mut R) -> Vec<bool> {
    let mut v = vec![false; n];
    for i in rand::seq::index::sample(rng, n, k) {
        v[i] = true;
    }
    v
}

#[test]
fn group_size_limits() {
    assert_eq!(f_max(4), 1);
    assert_eq!(f_max(6), 1);
    assert_eq!(f_max(7), 2);
    assert_eq!(f_max(10), 3);
    assert!(OperationMode::Consensus.check_group(3).is_err());
    assert!(OperationMode::SocialQuantumConsensus.check_group(3).is_err());
    assert!(OperationMode::Social.check_group(1).is_ok());
    assert!(OperationMode::Standard.check_group(11).is_err());
    assert_eq!(OperationMode::Standard.byzantine_tolerance(4), 0.0);
    assert_eq!(OperationMode::Consensus.byzantine_tolerance(4), 0.25);
    for m in OperationMode::ALL {
        assert_eq!(m.as_str().parse::<OperationMode>().unwrap(), m);
        assert_eq!(m.title().parse::<OperationMode>().unwrap(), m);
    }
}

#[test]
fn one_soft_fault_in_four_is_tolerated() {
    for bad in 0..4 {
        let mut reports = vec![Some(true); 4];
        reports[bad] = Some(false);
        let out = classical_agreement(&reports, FrameSizes::default(), &mut PerfectChannel);
        for (i, d) in out.decisions.iter().enumerate() {
            if i != bad {
                assert_eq!(*d, Some(true));
            }
        }
    }
}

#[test]
fn two_byzantine_in_four_can_break_agreement() {
    let mut r = substream(1, StreamKind::Test, 20, 0);
    let mut broken = false;
    for _ in 0..2000 {
        let behaviors = [Behavior::Byzantine, Behavior::Byzantine, Behavior::Honest, Behavior::Honest];
        let d = run_general(&[true; 4], &behaviors, 2, |_, _, _| true, &mut r);
        if d[2] != Some(true) || d[3] != Some(true) {
            broken = true;
            break;
        }
    }
    assert!(broken);
}

#[test]
fn classical_message_count_is_exact() {
    for n in 4..=10 {
        let out = classical_agreement(&vec![Some(true); n], FrameSizes::default(), &mut PerfectChannel);
        assert_eq!(out.messages, ((f_max(n) + 1) * n * (n - 1)) as u64, "n={n}");
        assert_eq!(out.rounds as usize, f_max(n) + 1);
    }
}

#[test]
fn classical_safety_with_byzantine_members() {
    let mut r = substream(2, StreamKind::Test, 21, 0);
    for n in [4, 7, 10] {
        let trials = if n == 10 { 100 } else { 1000 };
        for _ in 0..trials {
            let truth: bool = r.random();
            let f = r.random_range(0..=f_max(n));
            let bad = faulty_members(n, f, &mut r);
            let behaviors: Vec<Behavior> = bad
                .iter()
                .map(|&b| match (b, r.random_range(0..3)) {
                    (false, _) => Behavior::Honest,
                    (true, 0) => Behavior::Crash {
                        from_round: r.random_range(1..=f_max(n) + 1),
                    },
                    (true, _) => Behavior::Byzantine,
                })
                .collect();
            let inputs: Vec<bool> = bad.iter().map(|&b| if b { r.random() } else { truth }).collect();
            let d = run_general(&inputs, &behaviors, f_max(n) + 1, |_, _, _| true, &mut r);
            for i in (0..n).filter(|&i| !bad[i]) {
                assert_eq!(d[i], Some(truth), "n={n} behaviors={behaviors:?}");
            }
        }
    }
}

/// Replays a fixed loss pattern through both the general EIG tree and the
/// bitmask resolver used by the simulator.
#[test]
fn fast_resolver_matches_the_full_tree() {
    let mut r = substream(3, StreamKind::Test, 22, 0);
    for trial in 0..3000 {
        let n = r.random_range(4..=8);
        let rounds = f_max(n) + 1;
        let loss = [0.0, 0.05, 0.3, 0.7][trial % 4];
        let inputs: Vec<Option<bool>> = (0..n)
            .map(|_| if r.random_bool(0.1) { None } else { Some(r.random_bool(0.7)) })
            .collect();
        let table: Vec<bool> = (0..rounds * n * n).map(|_| !r.random_bool(loss)).collect();
        let ok = |round: usize, from: usize, to: usize| table[((round - 1) * n + from) * n + to];

        let mut run = ClassicalRun::new(inputs.clone());
        for round in 1..=rounds {
            for from in (0..n).filter(|&j| inputs[j].is_some()) {
                for to in (0..n).filter(|&i| i != from) {
                    run.record(round, from, to, ok(round, from, to));
                }
            }
        }
        let behaviors: Vec<Behavior> = inputs
            .iter()
            .map(|v| match v {
                Some(_) => Behavior::Honest,
                None => Behavior::Crash { from_round: 1 },
            })
            .collect();
        let plain: Vec<bool> = inputs.iter().map(|v| v.unwrap_or(false)).collect();
        let full = run_general(&plain, &behaviors, rounds, ok, &mut r);
        for i in (0..n).filter(|&i| inputs[i].is_some()) {
            assert_eq!(run.decide(i), full[i], "trial {trial} member {i}");
        }
    }
}

/// Drives the lock/adopt/coin rule with Byzantine members that equivocate
/// per receiver.
fn quantum_trial<R: Rng>(n: usize, truth: bool, bad: &[bool], rounds: u32, rng: &mut R) -> Vec<Option<bool>> {
    let inputs: Vec<Option<bool>> = bad
        .iter()
        .map(|&b| if b && rng.random_bool(0.3) { None } else { Some(truth) })
        .collect();
    let mut run = QuantumRun::new(inputs);
    for _ in 0..rounds {
        let lies: Vec<bool> = (0..n * n).map(|_| rng.random()).collect();
        let values: Vec<Option<bool>> = (0..n).map(|j| run.value(j)).collect();
        let coin = rng.random();
        run.round(
            |_, _| true,
            |j, i| if bad[j] { values[j].map(|_| lies[j * n + i]) } else { values[j] },
            coin,
        );
    }
    (0..n).map(|i| run.decide(i)).collect()
}

#[test]
fn quantum_safety_with_equivocating_members() {
    let mut r = substream(4, StreamKind::Test, 23, 0);
    for n in [4, 7, 10] {
        for _ in 0..2000 {
            let truth: bool = r.random();
            let f = r.random_range(0..=f_max(n));
            let bad = faulty_members(n, f, &mut r);
            let rounds = r.random_range(1..=4);
            let d = quantum_trial(n, truth, &bad, rounds, &mut r);
            for i in (0..n).filter(|&i| !bad[i]) {
                assert_eq!(d[i], Some(truth), "n={n}");
            }
        }
    }
}

#[test]
fn quantum_majority_of_faults_blocks_benevolent_agreement() {
    // more than half the members report the wrong value: nobody locks the truth
    let n = 7;
    let mut reports = vec![Some(false); n];
    for r in reports.iter_mut().take(3) {
        *r = Some(true);
    }
    let params = QuantumAgreementParams {
        round_success: 1.0,
        ..Default::default()
    };
    let mut rng = substream(5, StreamKind::Test, 24, 0);
    let out = quantum_agreement(&reports, &params, FrameSizes::default(), &mut PerfectChannel, |_| Some(true), &mut rng);
    assert!(out.decisions.iter().all(|d| *d != Some(true)));
    let out = classical_agreement(&reports, FrameSizes::default(), &mut PerfectChannel);
    assert!(out.decisions.iter().all(|d| *d != Some(true)));
}

#[test]
fn quantum_frames_grow_linearly() {
    let params = QuantumAgreementParams::default();
    let mut rng = substream(6, StreamKind::Test, 25, 0);
    for n in 4..=10 {
        let out = quantum_agreement(
            &vec![Some(true); n],
            &params,
            FrameSizes::default(),
            &mut PerfectChannel,
            |_| Some(false),
            &mut rng,
        );
        assert_eq!(out.messages, n as u64 * out.rounds as u64);
        assert_eq!(out.sessions, session_pairs(n).len() as u64 * out.rounds as u64);
        let classical = ((f_max(n) + 1) * n * (n - 1)) as u64;
        assert!(out.messages <= 8 * n as u64 && classical >= 2 * n as u64 * (n as u64 - 1));
    }
}

#[test]
fn mean_quantum_rounds_do_not_depend_on_group_size() {
    let params = QuantumAgreementParams::default();
    let mut means = Vec::new();
    for n in [4, 10] {
        let mut rng = substream(7, StreamKind::Test, 26, n as u64);
        let trials = 20_000;
        let mut total = 0u64;
        for _ in 0..trials {
            let out = quantum_agreement(
                &vec![Some(true); n],
                &params,
                FrameSizes::default(),
                &mut PerfectChannel,
                |_| Some(true),
                &mut rng,
            );
            total += out.rounds as u64;
        }
        means.push(total as f64 / trials as f64);
    }
    // geometric(1/2) capped at 8: mean just under 2, sd about 1.4
    assert!((means[0] - means[1]).abs() < 0.06, "{means:?}");
    assert!((means[0] - 2.0).abs() < 0.05);
}

#[test]
fn capped_rounds_fail_the_agreement() {
    let params = QuantumAgreementParams {
        round_success: 1e-9,
        max_rounds: 3,
        pairs_per_round: 1,
    };
    let mut rng = substream(8, StreamKind::Test, 27, 0);
    assert_eq!(params.draw_rounds(&mut rng), None);
    assert!(QuantumAgreementParams { max_rounds: 0, ..params }.validate().is_err());
}

#[test]
fn trust_decays_to_ostracism_on_schedule() {
    let params = TrustParams {
        initial_score: 1.0,
        ..Default::default()
    };
    let k = params.failures_to_ostracize();
    assert_eq!(k, 7);
    let mut ledger = TrustLedger::new(2, params);
    for step in 1..=k {
        let s = ledger.update_trust(0, 1, false);
        assert!((s - 0.9f64.powi(step as i32)).abs() < 1e-12);
        assert_eq!(ledger.flagged(0, 1), step == k);
    }
    // recovery needs the score back above threshold + hysteresis
    let mut steps = 0;
    while ledger.flagged(0, 1) {
        let s = ledger.update_trust(0, 1, true);
        steps += 1;
        assert!(s <= 1.0);
        if ledger.flagged(0, 1) {
            assert!(s <= 0.6 + 1e-12);
        }
    }
    assert!(steps > 1);
}

#[test]
fn successes_drive_trust_up_monotonically() {
    let mut ledger = TrustLedger::new(3, TrustParams::default());
    let mut prev = ledger.score(1, 2);
    for _ in 0..200 {
        let s = ledger.update_trust(1, 2, true);
        assert!(s >= prev && s <= 1.0);
        prev = s;
    }
    assert!(prev > 0.999);
}

#[test]
fn persistent_liar_is_ostracized_and_only_probed() {
    let n = 5;
    let mut ledger = TrustLedger::new(n, TrustParams::default());
    for _ in 0..20 {
        for obs in 0..n {
            for subj in 0..n {
                if ledger.exchanges(obs, subj, false) {
                    ledger.update_trust(obs, subj, subj != 4 && obs != 4);
                }
            }
        }
        ledger.end_period();
    }
    assert!(ledger.is_ostracized(4));
    assert_eq!(ledger.active_members(), vec![0, 1, 2, 3]);
    for obs in 0..4 {
        assert!(!ledger.exchanges(obs, 4, false));
        assert!(ledger.exchanges(obs, 4, true));
    }
    assert_eq!(ledger.most_trusted(0..n).map(|m| m != 4), Some(true));
}

#[test]
fn excluded_pairs_do_not_exchange() {
    let mut ledger = TrustLedger::new(4, TrustParams::default());
    ledger.exclude_pair(0, 3);
    assert!(!ledger.exchanges(0, 3, true));
    assert!(!ledger.exchanges(3, 0, true));
    assert!(ledger.exchanges(1, 3, false));
}

#[test]
fn fault_injection_rates() {
    let truth = Reading::from_temperature(-3.0);
    let mut r = substream(9, StreamKind::Test, 28, 0);
    let clean = ByzantineProfile {
        p_b0: 0.0,
        fault_kind: FaultKind::Soft,
    };
    let always = ByzantineProfile { p_b0: 1.0, ..clean };
    for _ in 0..1000 {
        assert_eq!(sense(&clean, truth, &mut r).value(), Some(true));
        assert_eq!(sense(&always, truth, &mut r).value(), Some(false));
    }
    let some = ByzantineProfile { p_b0: 0.1, ..clean };
    let draws = 10_000;
    let faulty = (0..draws)
        .filter(|_| matches!(sense(&some, truth, &mut r), Sensed::Report { faulty: true, .. }))
        .count();
    assert!((faulty as f64 / draws as f64 - 0.1).abs() < 0.01);
    let crash = ByzantineProfile {
        p_b0: 1.0,
        fault_kind: FaultKind::Crash,
    };
    assert_eq!(sense(&crash, truth, &mut r), Sensed::Crash);
    let flipped = truth.corrupted();
    assert!(!flipped.frozen && flipped.temperature_c == 3.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]
    #[test]
    fn scores_stay_in_the_unit_interval(
        w in 0.01f64..1.0,
        init in 0.0f64..1.0,
        history in prop::collection::vec(any::<bool>(), 0..200),
    ) {
        let params = TrustParams { weight: w, initial_score: init, ..Default::default() };
        let mut ledger = TrustLedger::new(2, params);
        for ok in history {
            let s = ledger.update_trust(0, 1, ok);
            prop_assert!((0.0..=1.0).contains(&s));
        }
        ledger.end_period();
        prop_assert!((0.0..=1.0).contains(&ledger.reputation(0)));
    }

    #[test]
    fn agreement_is_unanimous_without_faults(n in 4usize..=10, v in any::<bool>(), seed in any::<u64>()) {
        let out = classical_agreement(&vec![Some(v); n], FrameSizes::default(), &mut PerfectChannel);
        prop_assert!(out.decisions.iter().all(|d| *d == Some(v)));
        let mut rng = substream(seed, StreamKind::Test, 29, 0);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let out = quantum_agreement(
            &vec![Some(v); n],
            &QuantumAgreementParams::default(),
            FrameSizes::default(),
            &mut PerfectChannel,
            |_| Some(!v),
            &mut rng,
        );
        prop_assert!(out.rounds == 8 || out.decisions.iter().all(|d| *d == Some(v)));
    }
}
