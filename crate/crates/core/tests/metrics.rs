use qtrust::metrics::{compute_kpis, fmt_kpi, EventLog, TransactionRecord};

const HOUR: f64 = 3600.0;

fn tx(generated_at: f64, delay: Option<f64>, correct: bool) -> TransactionRecord {
    TransactionRecord {
        spot: 0,
        generated_at,
        delivered_at: delay.map(|d| generated_at + d),
        correct,
    }
}

fn log(transactions: Vec<TransactionRecord>) -> EventLog {
    EventLog {
        warmup_s: 0.0,
        max_reception_s: 6.0 * HOUR,
        transactions,
        ..Default::default()
    }
}

#[test]
fn three_late_out_of_ten() {
    let mut t: Vec<_> = (0..7).map(|i| tx(i as f64 * HOUR, Some(HOUR), true)).collect();
    t.extend((7..10).map(|i| tx(i as f64 * HOUR, Some(7.0 * HOUR), true)));
    let m = compute_kpis(&log(t));
    assert_eq!(m.str_, Some(0.7));
    assert_eq!(m.counters.transactions, 10);
    assert_eq!(m.counters.successes, 7);
}

#[test]
fn deadline_is_inclusive_and_wrong_values_fail() {
    let m = compute_kpis(&log(vec![
        tx(0.0, Some(6.0 * HOUR), true),
        tx(1.0, Some(1.0), false),
        tx(2.0, None, true),
    ]));
    assert_eq!(m.counters.successes, 1);
}

#[test]
fn clean_run_is_perfect() {
    let mut l = log((0..5).map(|i| tx(i as f64, Some(1.0), true)).collect());
    l.sensed = 50;
    l.packets_sent = 40;
    l.packets_delivered = 40;
    let m = compute_kpis(&l);
    assert_eq!((m.fsr, m.pdr, m.str_), (Some(0.0), Some(1.0), Some(1.0)));
}

#[test]
fn everything_dropped() {
    let mut l = log((0..5).map(|i| tx(i as f64, None, true)).collect());
    l.packets_sent = 40;
    let m = compute_kpis(&l);
    assert_eq!((m.pdr, m.str_), (Some(0.0), Some(0.0)));
}

#[test]
fn warmup_transactions_are_ignored() {
    let mut l = log(vec![tx(10.0, None, true), tx(200.0, Some(1.0), true)]);
    l.warmup_s = 100.0;
    assert_eq!(compute_kpis(&l).str_, Some(1.0));
}

#[test]
fn empty_denominators_print_as_na() {
    let m = compute_kpis(&log(vec![]));
    assert_eq!(m.str_, None);
    assert_eq!(m.fsr, None);
    assert_eq!(fmt_kpi(m.pdr), "NA");
    assert_eq!(fmt_kpi(Some(0.25)), "0.250000");
}

#[test]
fn ratios_are_raw_counter_quotients() {
    let mut l = log(vec![]);
    l.sensed = 7;
    l.faulty = 3;
    l.packets_sent = 9;
    l.packets_delivered = 4;
    let m = compute_kpis(&l);
    assert_eq!(m.fsr, Some(3.0 / 7.0));
    assert_eq!(m.pdr, Some(4.0 / 9.0));
}
