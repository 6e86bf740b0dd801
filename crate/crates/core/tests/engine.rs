use proptest::prelude::*;
use qtrust::engine::{
    simulate_up_fraction, substream, Backbone, Bundle, DropCause, DtnBuffer, EngineError,
    EventQueue, FrameFate, LoraConfig, LoraLink, NvisLink, StreamKind,
};
use rand::Rng;

const DAY: f64 = 86_400.0;
const HOUR: f64 = 3600.0;

fn lora(frame_error: f64, cap: u64) -> LoraLink {
    LoraLink::new(&LoraConfig {
        bitrate_bps: 5470.0,
        frame_error,
        queue_capacity_bytes: cap,
    })
    .unwrap()
}

#[test]
fn empty_queue_runs_nothing() {
    let mut q: EventQueue<u32> = EventQueue::new();
    assert_eq!(q.run_until(100.0, |_, _, _| Ok(())).unwrap(), 0);
    assert_eq!(q.now(), 100.0);
}

#[test]
fn equal_times_dispatch_in_insertion_order() {
    let mut q = EventQueue::new();
    for i in 0..50u32 {
        q.schedule(if i % 2 == 0 { 5.0 } else { 3.0 }, i).unwrap();
    }
    let mut seen = Vec::new();
    q.run_until(10.0, |_, t, e| {
        seen.push((t, e));
        Ok(())
    })
    .unwrap();
    let odd: Vec<u32> = (0..50).filter(|i| i % 2 == 1).collect();
    let even: Vec<u32> = (0..50).filter(|i| i % 2 == 0).collect();
    let want: Vec<u32> = odd.into_iter().chain(even).collect();
    assert_eq!(seen.iter().map(|x| x.1).collect::<Vec<_>>(), want);
    assert_eq!(q.dispatched(), 50);
}

#[test]
fn scheduling_into_the_past_is_an_error() {
    let mut q = EventQueue::new();
    q.schedule(10.0, ()).unwrap();
    q.run_until(20.0, |_, _, _| Ok(())).unwrap();
    assert!(matches!(q.schedule(5.0, ()), Err(EngineError::PastEvent { .. })));
}

#[test]
fn handlers_can_chain_events() {
    let mut q = EventQueue::new();
    q.schedule(0.0, 0u32).unwrap();
    let n = q
        .run_until(9.5, |q, t, k| {
            q.schedule(t + 1.0, k + 1)?;
            Ok(())
        })
        .unwrap();
    assert_eq!(n, 10);
}

#[test]
fn hundred_byte_frame_takes_its_serialization_time() {
    let mut link = lora(0.0, 4096);
    let mut r = substream(1, StreamKind::Test, 0, 0);
    let fate = link.send(0.0, 100, &mut r);
    assert!((fate.delivered_at().unwrap() - 800.0 / 5470.0).abs() < 1e-12);
    // the second frame waits for the first
    let fate = link.send(0.0, 100, &mut r);
    assert!((fate.delivered_at().unwrap() - 1600.0 / 5470.0).abs() < 1e-12);
}

#[test]
fn full_queue_drops_for_congestion() {
    let mut link = lora(0.0, 250);
    let mut r = substream(1, StreamKind::Test, 0, 0);
    assert!(link.send(0.0, 100, &mut r).delivered_at().is_some());
    assert!(link.send(0.0, 100, &mut r).delivered_at().is_some());
    assert!(matches!(
        link.send(0.0, 100, &mut r),
        FrameFate::Dropped {
            cause: DropCause::Congestion,
            ..
        }
    ));
    // once the head has left there is room again
    assert!(link.send(0.2, 100, &mut r).delivered_at().is_some());
}

#[test]
fn certain_frame_error_always_drops() {
    let mut link = lora(1.0, 1 << 20);
    let mut r = substream(1, StreamKind::Test, 0, 0);
    for i in 0..100 {
        assert!(matches!(
            link.send(i as f64, 20, &mut r),
            FrameFate::Dropped {
                cause: DropCause::Channel,
                ..
            }
        ));
    }
}

#[test]
fn admission_control_rejects_oversubscription() {
    let mut link = lora(0.0, 4096);
    assert!(link.reserve_bandwidth(3000.0).is_ok());
    assert!(matches!(
        link.reserve_bandwidth(3000.0),
        Err(EngineError::Admission { .. })
    ));
    assert!(link.reserve_bandwidth(2470.0).is_ok());
    assert_eq!(link.residual_bps(), 0.0);
}

#[test]
fn reserved_flow_survives_saturating_data_load() {
    let mut link = lora(0.1, 2048);
    let flow = link.reserve_bandwidth(1000.0).unwrap();
    let mut r = substream(2, StreamKind::Test, 0, 0);
    let mut congested = 0;
    for i in 0..5000 {
        let t = i as f64 * 0.05;
        if let FrameFate::Dropped {
            cause: DropCause::Congestion,
            ..
        } = link.send(t, 100, &mut r)
        {
            congested += 1;
        }
        if i % 10 == 0 {
            link.send_reserved(t, flow, 1, 40, &mut r).unwrap();
        }
    }
    link.settle(1e9);
    assert!(congested > 1000, "data load did not saturate");
    let c = link.flow_counters(flow).unwrap();
    assert_eq!(c.dropped_congestion, 0);
    assert_eq!(c.sent, c.delivered + c.dropped_channel);
    assert!(c.delivered >= 500);
}

#[test]
fn nvis_sojourn_means() {
    let link = NvisLink::new(0.7, 7.0 * HOUR, 100.0, 0.0).unwrap();
    assert!((link.mean_down_s() - 3.0 * HOUR).abs() < 1e-9);
    let mut always = NvisLink::new(1.0, 7.0 * HOUR, 100.0, 0.0).unwrap();
    let mut r = substream(3, StreamKind::Test, 0, 0);
    always.start(0.0, &mut r);
    assert!(always.is_up());
    assert_eq!(always.sojourn(&mut r), None);
    assert_eq!(simulate_up_fraction(&mut always, 400.0 * DAY, &mut r), 1.0);
    assert!(NvisLink::new(1.2, 1.0, 1.0, 0.0).is_err());
}

#[test]
fn nvis_up_fraction_is_stationary() {
    for (i, p) in [0.7, 0.85].into_iter().enumerate() {
        let mut total = 0.0;
        let runs = 20;
        for k in 0..runs {
            let mut link = NvisLink::new(p, 7.0 * HOUR, 100.0, 0.0).unwrap();
            let mut r = substream(4, StreamKind::Test, i as u64, k);
            total += simulate_up_fraction(&mut link, 400.0 * DAY, &mut r);
        }
        let mean = total / runs as f64;
        assert!((mean - p).abs() < 0.01, "p_up {p}: mean {mean}");
    }
}

fn bundle(id: u64, bytes: u64) -> Bundle<()> {
    Bundle {
        id,
        bytes,
        created_at: id as f64,
        payload: (),
    }
}

#[test]
fn dtn_drops_oldest_on_overflow() {
    let mut buf = DtnBuffer::new(300);
    for id in 0..3 {
        assert!(buf.store(bundle(id, 100)).unwrap().is_empty());
    }
    let evicted = buf.store(bundle(3, 150)).unwrap();
    assert_eq!(evicted.iter().map(|b| b.id).collect::<Vec<_>>(), vec![0, 1]);
    assert_eq!(buf.front().unwrap().id, 2);
    assert_eq!(buf.counters().dropped_overflow, 2);
    assert!(matches!(
        buf.store(bundle(9, 301)),
        Err(EngineError::BundleTooLarge { .. })
    ));

    // capacity for one bundle: every store evicts the previous one
    let mut one = DtnBuffer::new(100);
    for id in 0..5 {
        let ev = one.store(bundle(id, 100)).unwrap();
        assert_eq!(ev.len(), usize::from(id > 0));
    }
    assert_eq!(one.counters().dropped_overflow, 4);
    assert_eq!(one.front().unwrap().id, 4);
}

#[derive(Debug)]
enum Bb {
    Store(u64),
    Toggle,
    Done(u64),
}

/// Drives a backbone with periodic bundles and returns (id, stored, released)
/// for delivered bundles.
fn drive_backbone(p_up: f64, seed: u64, horizon: f64) -> (Vec<(u64, f64, f64)>, Backbone<()>) {
    let mut r = substream(seed, StreamKind::Test, 5, 0);
    let mut link = NvisLink::new(p_up, 7.0 * HOUR, 2400.0, 0.0).unwrap();
    link.start(0.0, &mut r);
    let first = link.sojourn(&mut r);
    let mut bb = Backbone::new(link, DtnBuffer::new(1 << 20));
    let mut q = EventQueue::new();
    if let Some(t) = first {
        q.schedule(t, Bb::Toggle).unwrap();
    }
    let mut t = 0.0;
    let mut id = 0;
    while t < horizon {
        q.schedule(t, Bb::Store(id)).unwrap();
        id += 1;
        t += 600.0;
    }
    let mut out = Vec::new();
    q.run_until(horizon, |q, now, ev| {
        let start = match ev {
            Bb::Store(id) => bb.store(now, bundle(id, 300)).unwrap().1,
            Bb::Toggle => {
                assert!(!bb.busy() || bb.link.is_up());
                let (next, start) = bb.toggle(now, &mut r);
                if let Some(n) = next {
                    q.schedule(n, Bb::Toggle)?;
                }
                start
            }
            Bb::Done(token) => {
                let (done, start) = bb.complete(now, token, &mut r);
                if let Some((b, lost)) = done {
                    assert!(bb.link.is_up());
                    assert!(!lost);
                    out.push((b.id, b.id as f64 * 600.0, now));
                }
                start
            }
        };
        if let Some(s) = start {
            q.schedule(s.done_at, Bb::Done(s.token))?;
        }
        Ok(())
    })
    .unwrap();
    (out, bb)
}

#[test]
fn dtn_never_releases_while_down_and_waits_out_outages() {
    let (out, bb) = drive_backbone(0.7, 11, 60.0 * DAY);
    assert_eq!(bb.counters().released_while_down, 0);
    let tx = 8.0 * 300.0 / 2400.0;
    let slow = out.iter().filter(|(_, s, d)| d - s > 10.0 * tx).count();
    assert!(slow > 0, "no bundle ever waited for an outage");
}

#[test]
fn always_up_backbone_is_pass_through() {
    let (out, bb) = drive_backbone(1.0, 12, 5.0 * DAY);
    let tx = 8.0 * 300.0 / 2400.0;
    assert_eq!(bb.counters().interrupted, 0);
    for (_, s, d) in out {
        assert!((d - s - tx).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn lora_conserves_frames(
        seed in any::<u64>(),
        err in 0.0f64..0.5,
        cap in 100u64..4000,
        gaps in prop::collection::vec(0.0f64..0.3, 1..300),
        t_end in 0.0f64..100.0,
    ) {
        let mut link = lora(err, cap);
        let mut r = substream(seed, StreamKind::Test, 6, 0);
        let mut t = 0.0;
        for g in gaps {
            t += g;
            let bytes = r.random_range(10..120);
            link.send(t, bytes, &mut r);
        }
        let end = t.max(t_end);
        link.settle(end);
        let c = link.data_counters();
        prop_assert_eq!(c.sent, c.delivered + c.dropped_congestion + c.dropped_channel + link.in_flight());
    }

    #[test]
    fn event_order_is_non_decreasing(times in prop::collection::vec(0.0f64..1000.0, 0..200)) {
        let mut q = EventQueue::new();
        for (i, t) in times.iter().enumerate() {
            q.schedule(*t, i).unwrap();
        }
        let mut last = (f64::NEG_INFINITY, 0usize);
        q.run_until(1000.0, |_, t, i| {
            assert!(t > last.0 || (t == last.0 && i > last.1));
            last = (t, i);
            Ok(())
        }).unwrap();
    }
}
