//! KPIs of a run and the sweep harness that produces meshes and tables.

pub mod sweep;

use serde::Serialize;

/// One spot reading's journey to the control center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransactionRecord {
    pub spot: u32,
    pub generated_at: f64,
    /// Arrival of the bundle carrying the selected value, if it arrived.
    pub delivered_at: Option<f64>,
    /// Whether the selected value matched the ground truth.
    pub correct: bool,
}

/// Raw material for KPI computation. Counters only cover activity after
/// the warm-up.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EventLog {
    pub warmup_s: f64,
    pub max_reception_s: f64,
    pub transactions: Vec<TransactionRecord>,
    pub sensed: u64,
    pub faulty: u64,
    pub packets_sent: u64,
    pub packets_delivered: u64,
    /// Design tolerance of the mode and group size.
    pub bnt: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct KpiCounters {
    pub sensed: u64,
    pub faulty: u64,
    pub sent: u64,
    pub delivered: u64,
    pub transactions: u64,
    pub successes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunMetrics {
    pub fsr: Option<f64>,
    pub pdr: Option<f64>,
    pub str_: Option<f64>,
    pub bnt: f64,
    pub counters: KpiCounters,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn compute_kpis(log: &EventLog) -> RunMetrics {
    let mut counters = KpiCounters {
        sensed: log.sensed,
        faulty: log.faulty,
        sent: log.packets_sent,
        delivered: log.packets_delivered,
        ..Default::default()
    };
    for t in &log.transactions {
        if t.generated_at < log.warmup_s {
            continue;
        }
        counters.transactions += 1;
        let in_time = t
            .delivered_at
            .is_some_and(|d| d - t.generated_at <= log.max_reception_s);
        if in_time && t.correct {
            counters.successes += 1;
        }
    }
    RunMetrics {
        fsr: ratio(counters.faulty, counters.sensed),
        pdr: ratio(counters.delivered, counters.sent),
        str_: ratio(counters.successes, counters.transactions),
        bnt: log.bnt,
        counters,
    }
}

/// KPI cell text; undefined ratios print as `NA`.
pub fn fmt_kpi(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.6}"),
        None => "NA".to_string(),
    }
}
