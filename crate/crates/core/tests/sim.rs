use qtrust::config::{PersistentFault, ScenarioConfig};
use qtrust::sim::{run_scenario, RunOptions};
use qtrust::trustnet::OperationMode;

fn small(seed: u64, mode: OperationMode, p_b0: f64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(seed, 8, 4, mode, p_b0);
    cfg.workload.days = 60.0;
    cfg
}

/// Bandwidth and backbone that never get in the way.
fn unconstrained(mut cfg: ScenarioConfig) -> ScenarioConfig {
    cfg.lora.bitrate_bps = 1e7;
    cfg.lora.frame_error = 0.0;
    cfg.lora.queue_capacity_bytes = 1 << 30;
    cfg.nvis.p_up = 1.0;
    cfg.nvis.bundle_error = 0.0;
    cfg.nvis.bitrate_bps = 1e7;
    cfg
}

fn str_of(cfg: &ScenarioConfig) -> f64 {
    run_scenario(cfg, RunOptions::default()).unwrap().metrics.str_.unwrap()
}

#[test]
fn same_seed_same_result() {
    for mode in OperationMode::ALL {
        let cfg = small(5, mode, 0.05);
        let a = run_scenario(&cfg, RunOptions::default()).unwrap();
        let b = run_scenario(&cfg, RunOptions::default()).unwrap();
        assert_eq!(a.metrics, b.metrics, "{mode}");
        assert_eq!(a.log, b.log, "{mode}");
    }
}

#[test]
fn different_seeds_differ() {
    let a = str_of(&small(1, OperationMode::Social, 0.05));
    let b = str_of(&small(2, OperationMode::Social, 0.05));
    assert_ne!(a, b);
}

#[test]
fn clean_network_succeeds_every_time() {
    let cfg = unconstrained(small(3, OperationMode::Standard, 0.0));
    let out = run_scenario(&cfg, RunOptions::default()).unwrap();
    assert_eq!(out.metrics.str_, Some(1.0));
    assert_eq!(out.metrics.fsr, Some(0.0));
    assert_eq!(out.metrics.pdr, Some(1.0));
}

#[test]
fn consensus_beats_standard_without_congestion() {
    for seed in 1..=3 {
        let std = str_of(&unconstrained(small(seed, OperationMode::Standard, 0.1)));
        let con = str_of(&unconstrained(small(seed, OperationMode::Consensus, 0.1)));
        let qc = str_of(&unconstrained(small(seed, OperationMode::QuantumConsensus, 0.1)));
        assert!(con >= std, "seed {seed}: {con} < {std}");
        assert!(qc >= std, "seed {seed}: {qc} < {std}");
    }
}

#[test]
fn more_faults_lower_the_success_rate() {
    for mode in [OperationMode::Standard, OperationMode::Consensus] {
        let lo = str_of(&small(4, mode, 0.001));
        let hi = str_of(&small(4, mode, 0.3));
        assert!(hi < lo, "{mode}: {hi} >= {lo}");
    }
}

#[test]
fn byzantine_tolerance_is_the_design_ratio() {
    let out = run_scenario(&small(1, OperationMode::Consensus, 0.01), RunOptions::default()).unwrap();
    assert_eq!(out.metrics.bnt, 0.25);
    let out = run_scenario(&small(1, OperationMode::Social, 0.01), RunOptions::default()).unwrap();
    assert_eq!(out.metrics.bnt, 0.0);
}

#[test]
fn persistent_liar_gets_ostracized() {
    let mut cfg = small(6, OperationMode::Social, 0.0);
    cfg.scenario.spots = 1;
    cfg.scenario.persistent_faults = vec![PersistentFault {
        spot: 0,
        member: 2,
        from_day: 10.0,
    }];
    let out = run_scenario(
        &cfg,
        RunOptions {
            record_trust: true,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(out.diagnostics.ostracized_at_end, 1);
    let last = out.trust_series.iter().rev().find(|s| s.member == 2).unwrap();
    assert!(last.ostracized && last.reputation < 0.1);
    for s in out.trust_series.iter().filter(|s| s.member != 2) {
        assert!(!s.ostracized);
        assert!((0.0..=1.0).contains(&s.reputation));
    }
}

#[test]
fn quantum_modes_use_the_quantum_plane() {
    let out = run_scenario(&small(7, OperationMode::QuantumConsensus, 0.01), RunOptions::default()).unwrap();
    let plane = out.diagnostics.plane.expect("plane active");
    assert!(plane.sessions > 0);
    assert!(out.diagnostics.quantum_agreements > 0);
    assert!(out.diagnostics.control.iter().any(|c| c.sent > 0));
    let out = run_scenario(&small(7, OperationMode::Consensus, 0.01), RunOptions::default()).unwrap();
    assert!(out.diagnostics.plane.is_none());
    assert!(out.diagnostics.control.iter().all(|c| c.sent == 0));
    assert!(out.diagnostics.classical_messages > 0);
}

#[test]
fn backbone_never_sends_while_down() {
    let out = run_scenario(&small(8, OperationMode::Social, 0.01), RunOptions::default()).unwrap();
    for b in &out.diagnostics.backbone {
        assert_eq!(b.released_while_down, 0);
    }
    for (c, l) in out.diagnostics.lora.iter().enumerate() {
        let in_flight = out.diagnostics.lora_in_flight[c];
        assert_eq!(l.sent, l.delivered + l.dropped_congestion + l.dropped_channel + in_flight);
    }
}

#[test]
fn trace_is_written() {
    let buf = std::sync::Arc::new(std::sync::Mutex::new(Vec::new()));
    struct Sink(std::sync::Arc<std::sync::Mutex<Vec<u8>>>);
    impl std::io::Write for Sink {
        fn write(&mut self, b: &[u8]) -> std::io::Result<usize> {
            self.0.lock().unwrap().extend_from_slice(b);
            Ok(b.len())
        }
        fn flush(&mut self) -> std::io::Result<()> {
            Ok(())
        }
    }
    let mut cfg = small(9, OperationMode::Consensus, 0.01);
    cfg.workload.days = 10.0;
    cfg.workload.warmup_days = 1.0;
    run_scenario(
        &cfg,
        RunOptions {
            trace: Some(Box::new(Sink(buf.clone()))),
            ..Default::default()
        },
    )
    .unwrap();
    let text = String::from_utf8(buf.lock().unwrap().clone()).unwrap();
    let first = text.lines().next().unwrap();
    let v: serde_json::Value = serde_json::from_str(first).unwrap();
    assert!(v.get("t").is_some() || v.get("time").is_some(), "{first}");
}
