//! One deterministic scenario run: sensors at every measuring spot sample on
//! a shared schedule, the chosen operation mode turns their readings into
//! LoRa traffic, concentrators bundle what arrives into the DTN, and the NVIS
//! backbone carries bundles to the control center.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, ScenarioConfig};
use crate::engine::{
    substream, Backbone, BackboneCounters, Bundle, DtnBuffer, DtnCounters, EngineError,
    EventQueue, FlowId, LinkCounters, LoraConfig, LoraLink, NvisLink, StreamKind, Trace, TxStart,
};
use crate::metrics::{compute_kpis, EventLog, RunMetrics, TransactionRecord};
use crate::qlink::{
    label_from_link, md_measure, Basis, EntanglementAttempt, EprSession, PlaneCounters,
    QlinkError, QuantumPlane,
};
use crate::ralgebra::{NodeId, QuantumLink, QuantumTopology, RoutingError};
use crate::trustnet::{
    sense, session_pairs, ByzantineProfile, ClassicalRun, OperationMode, QuantumAgreementParams,
    QuantumRun, Reading, Sensed, TrustLedger,
};

const DAY: f64 = 86_400.0;
const YEAR: f64 = 365.0 * DAY;
const CONTROL_CENTER: NodeId = NodeId(1_000);

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("engine: {0}")]
    Engine(#[from] EngineError),
    #[error("quantum plane: {0}")]
    Qlink(#[from] QlinkError),
    #[error("quantum topology: {0}")]
    Routing(#[from] RoutingError),
}

#[derive(Default)]
pub struct RunOptions {
    pub trace: Option<Box<dyn Write + Send>>,
    /// Keep every node's reputation after each transaction.
    pub record_trust: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrustSample {
    pub t_days: f64,
    pub spot: u32,
    pub member: u32,
    pub reputation: f64,
    pub ostracized: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Diagnostics {
    pub events: u64,
    pub lora: Vec<LinkCounters>,
    pub lora_in_flight: Vec<u64>,
    pub control: Vec<LinkCounters>,
    pub backbone: Vec<BackboneCounters>,
    pub dtn: Vec<DtnCounters>,
    pub nvis_up_fraction: Vec<f64>,
    pub plane: Option<PlaneCounters>,
    pub classical_agreements: u64,
    pub classical_messages: u64,
    pub quantum_agreements: u64,
    pub quantum_rounds: u64,
    pub quantum_broadcasts: u64,
    pub agreement_failures: u64,
    pub ostracized_at_end: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub log: EventLog,
    pub diagnostics: Diagnostics,
    pub trust_series: Vec<TrustSample>,
}

#[derive(Debug, Clone, Copy)]
enum Ev {
    Reading { spot: u32, k: u32 },
    ClassicalRound { spot: u32, k: u32, round: u8 },
    QuantumBroadcast { spot: u32, k: u32, round: u8 },
    QuantumTally { spot: u32, k: u32, round: u8 },
    Decide { spot: u32, k: u32 },
    Close { spot: u32, k: u32 },
    NvisToggle { c: u8 },
    NvisDone { c: u8, token: u64 },
    Flush { c: u8 },
}

#[derive(Debug, Clone, Copy)]
enum FrameKind {
    Report { member: usize, value: bool, probe: bool },
    /// Group indices, not member indices.
    Vote { round: usize, from: usize, to: usize },
    Broadcast { from: usize },
    Decision { member: usize, value: bool },
}

/// Frames handed to the radio at the same instant contend for the channel,
/// so a cluster's frames are collected and sent in random order.
#[derive(Debug, Clone, Copy)]
struct Frame {
    spot: u32,
    k: u32,
    bytes: u32,
    deadline: f64,
    kind: FrameKind,
}

#[derive(Debug, Clone, Copy)]
struct Report {
    member: usize,
    value: bool,
    /// Probe and trust-only frames reach the concentrator but never feed the
    /// selection.
    probe: bool,
}

#[derive(Debug, Clone, Copy)]
struct Observation {
    observer: usize,
    subject: usize,
    ok: bool,
}

enum Agreement {
    None,
    Classical(ClassicalRun),
    Quantum {
        run: QuantumRun,
        needed: Option<u32>,
        sessions: Vec<EprSession>,
        failed: bool,
        heard: Vec<bool>,
        coin: bool,
    },
}

struct Pending {
    k: u32,
    t0: f64,
    truth: bool,
    sensed: Vec<Sensed>,
    probe_due: bool,
    /// Members taking part in the agreement, by member index.
    group: Vec<usize>,
    agreement: Agreement,
    round_start: f64,
    reports: Vec<Report>,
    observations: Vec<Observation>,
}

struct Spot {
    cluster: usize,
    sensors: Vec<ChaCha8Rng>,
    rng: ChaCha8Rng,
    crng: ChaCha8Rng,
    phase: f64,
    ledger: Option<TrustLedger>,
    last_probe_period: i64,
    pending: Option<Pending>,
    faults: Vec<Option<f64>>,
}

struct Payload {
    tx: usize,
    counted: bool,
}

pub fn sensor_node(spot: usize, member: usize) -> NodeId {
    NodeId(10_000 + (spot * 16 + member) as u32)
}

/// Star topology of the quantum plane: every sensor links to its
/// concentrator, concentrators link to the control center.
pub fn build_topology(cfg: &ScenarioConfig) -> Result<QuantumTopology, SimError> {
    let q = &cfg.quantum;
    let att = EntanglementAttempt {
        link: (NodeId(0), NodeId(0)),
        p_ent: q.p_ent,
        attempt_period_s: q.attempt_period_s,
        f0: q.f0,
    };
    let label = label_from_link(&att, q.f_target, q.max_purify_rounds, q.control_cost_per_hop)?;
    let mut nodes = vec![CONTROL_CENTER];
    let mut links = Vec::new();
    let both = |a: NodeId, b: NodeId, links: &mut Vec<QuantumLink>| {
        links.push(QuantumLink { from: a, to: b, label });
        links.push(QuantumLink { from: b, to: a, label });
    };
    for c in 0..cfg.nvis.concentrators {
        let node = NodeId(c as u32);
        nodes.push(node);
        both(node, CONTROL_CENTER, &mut links);
    }
    for s in 0..cfg.scenario.spots {
        let conc = NodeId((s % cfg.nvis.concentrators) as u32);
        for m in 0..cfg.scenario.redundancy {
            let node = sensor_node(s, m);
            nodes.push(node);
            both(node, conc, &mut links);
        }
    }
    Ok(QuantumTopology::new(nodes, links)?)
}

struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    mode: OperationMode,
    n: usize,
    warmup: f64,
    horizon_readings: f64,
    profile: ByzantineProfile,
    qparams: QuantumAgreementParams,
    queue: EventQueue<Ev>,
    lora: Vec<LoraLink>,
    lora_rng: Vec<ChaCha8Rng>,
    flows: Vec<Option<FlowId>>,
    qrng: Vec<ChaCha8Rng>,
    backbones: Vec<Backbone<Payload>>,
    nvis_rng: Vec<ChaCha8Rng>,
    loss_rng: Vec<ChaCha8Rng>,
    plane: Option<QuantumPlane>,
    spots: Vec<Spot>,
    log: EventLog,
    diag: Diagnostics,
    trace: Trace,
    record_trust: bool,
    trust_series: Vec<TrustSample>,
    next_bundle: u64,
    noise: Normal<f64>,
    outbox: Vec<Vec<Frame>>,
    flush_due: Vec<bool>,
}

pub fn run_scenario(cfg: &ScenarioConfig, opts: RunOptions) -> Result<RunOutput, SimError> {
    cfg.validate()?;
    let mut sim = Sim::new(cfg, opts)?;
    sim.run()?;
    Ok(sim.finish())
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a ScenarioConfig, opts: RunOptions) -> Result<Self, SimError> {
        let seed = cfg.seed;
        let sc = &cfg.scenario;
        let mode = sc.mode;
        let n = sc.redundancy;
        let conc = cfg.nvis.concentrators;
        let lora_cfg = LoraConfig {
            bitrate_bps: cfg.lora.bitrate_bps,
            frame_error: cfg.lora.frame_error,
            queue_capacity_bytes: cfg.lora.queue_capacity_bytes,
        };
        let mut lora = Vec::with_capacity(conc);
        let mut flows = Vec::with_capacity(conc);
        for _ in 0..conc {
            let mut link = LoraLink::new(&lora_cfg)?;
            flows.push(if mode.quantum() {
                Some(link.reserve_bandwidth(cfg.quantum.reserved_bps)?)
            } else {
                None
            });
            lora.push(link);
        }
        let mut backbones = Vec::with_capacity(conc);
        let mut nvis_rng = Vec::with_capacity(conc);
        let mut queue = EventQueue::new();
        for c in 0..conc {
            let link = NvisLink::new(
                cfg.nvis.p_up,
                cfg.nvis.mean_up_s,
                cfg.nvis.bitrate_bps,
                cfg.nvis.bundle_error,
            )?;
            let mut bb = Backbone::new(link, DtnBuffer::new(cfg.nvis.dtn_capacity_bytes));
            let mut rng = substream(seed, StreamKind::Nvis, c as u64, 0);
            bb.link.start(0.0, &mut rng);
            if let Some(d) = bb.link.sojourn(&mut rng) {
                queue.schedule(d, Ev::NvisToggle { c: c as u8 })?;
            }
            backbones.push(bb);
            nvis_rng.push(rng);
        }
        let plane = if mode.quantum() {
            Some(QuantumPlane::new(build_topology(cfg)?, cfg.quantum)?)
        } else {
            None
        };
        let trust = cfg.trust.params();
        let spots = (0..sc.spots)
            .map(|s| {
                let mut rng = substream(seed, StreamKind::Spot, s as u64, 0);
                let phase = rng.random::<f64>() * 0.5;
                let ledger = mode.social().then(|| {
                    let mut l = TrustLedger::new(n, trust);
                    for [a, b] in &cfg.trust.exclude_pairs {
                        l.exclude_pair(*a, *b);
                    }
                    l
                });
                let mut faults = vec![None; n];
                for f in sc.persistent_faults.iter().filter(|f| f.spot == s) {
                    faults[f.member] = Some(f.from_day * DAY);
                }
                Spot {
                    cluster: s % conc,
                    sensors: (0..n)
                        .map(|m| substream(seed, StreamKind::Sensor, s as u64, m as u64))
                        .collect(),
                    rng,
                    crng: substream(seed, StreamKind::Consensus, s as u64, 0),
                    phase,
                    ledger,
                    last_probe_period: -1,
                    pending: None,
                    faults,
                }
            })
            .collect();
        let log = EventLog {
            warmup_s: cfg.workload.warmup_days * DAY,
            max_reception_s: cfg.workload.max_reception_s,
            bnt: mode.byzantine_tolerance(n),
            ..Default::default()
        };
        let mut sim = Sim {
            cfg,
            mode,
            n,
            warmup: cfg.workload.warmup_days * DAY,
            horizon_readings: cfg.workload.days * DAY,
            profile: ByzantineProfile {
                p_b0: sc.p_b0,
                fault_kind: sc.fault_kind,
            },
            qparams: cfg.consensus.quantum(),
            queue,
            lora,
            lora_rng: (0..conc)
                .map(|c| substream(seed, StreamKind::Lora, c as u64, 0))
                .collect(),
            flows,
            qrng: (0..conc)
                .map(|c| substream(seed, StreamKind::Quantum, c as u64, 0))
                .collect(),
            backbones,
            nvis_rng,
            loss_rng: (0..conc)
                .map(|c| substream(seed, StreamKind::NvisChannel, c as u64, 0))
                .collect(),
            plane,
            spots,
            log,
            diag: Diagnostics::default(),
            trace: opts.trace.map(Trace::new).unwrap_or_else(Trace::disabled),
            record_trust: opts.record_trust,
            trust_series: Vec::new(),
            next_bundle: 0,
            noise: Normal::new(0.0, cfg.workload.temperature_noise_c.max(0.0))
                .expect("finite deviation"),
            outbox: vec![Vec::new(); conc],
            flush_due: vec![false; conc],
        };
        for s in 0..sim.spots.len() {
            let t = sim.reading_time(s, 0);
            sim.queue.schedule(t, Ev::Reading { spot: s as u32, k: 0 })?;
        }
        Ok(sim)
    }

    fn reading_time(&mut self, s: usize, k: u32) -> f64 {
        let j = self.cfg.workload.reading_jitter_s;
        let offset = if j > 0.0 {
            self.spots[s].rng.random::<f64>() * j
        } else {
            0.0
        };
        k as f64 * self.cfg.workload.reading_period_s + offset
    }

    fn run(&mut self) -> Result<(), SimError> {
        let end = self.horizon_readings
            + self.cfg.workload.max_reception_s
            + self.cfg.workload.collect_window_s
            + self.agreement_budget();
        while let Some((t, ev)) = self.queue.pop_until(end) {
            self.dispatch(t, ev)?;
        }
        for s in 0..self.spots.len() {
            if let Some(p) = self.spots[s].pending.take() {
                self.close(end, s, p)?;
            }
        }
        self.diag.events = self.queue.dispatched();
        for l in &mut self.lora {
            l.settle(end);
        }
        self.diag.lora = self.lora.iter().map(|l| l.data_counters()).collect();
        self.diag.lora_in_flight = self.lora.iter().map(|l| l.in_flight()).collect();
        self.diag.control = self
            .lora
            .iter()
            .zip(&self.flows)
            .filter_map(|(l, f)| f.and_then(|f| l.flow_counters(f)))
            .collect();
        self.diag.backbone = self.backbones.iter().map(|b| b.counters()).collect();
        self.diag.dtn = self.backbones.iter().map(|b| b.buffer.counters()).collect();
        self.diag.nvis_up_fraction = self
            .backbones
            .iter()
            .map(|b| b.link.up_fraction(end))
            .collect();
        self.diag.plane = self.plane.as_ref().map(|p| p.counters());
        self.diag.ostracized_at_end = self
            .spots
            .iter()
            .filter_map(|s| s.ledger.as_ref())
            .map(|l| (0..l.members()).filter(|&m| l.is_ostracized(m)).count() as u64)
            .sum();
        self.trace.flush()?;
        Ok(())
    }

    fn agreement_budget(&self) -> f64 {
        let c = &self.cfg.consensus;
        c.round_duration_s * 4.0 + c.max_rounds as f64 * (c.broadcast_window_s + 600.0)
    }

    fn finish(self) -> RunOutput {
        RunOutput {
            metrics: compute_kpis(&self.log),
            log: self.log,
            diagnostics: self.diag,
            trust_series: self.trust_series,
        }
    }

    fn dispatch(&mut self, t: f64, ev: Ev) -> Result<(), SimError> {
        match ev {
            Ev::Reading { spot, k } => self.on_reading(t, spot as usize, k),
            Ev::ClassicalRound { spot, k, round } => {
                if self.current(spot as usize, k) {
                    self.classical_round(t, spot as usize, round as usize)?;
                }
                Ok(())
            }
            Ev::QuantumBroadcast { spot, k, round } => {
                if self.current(spot as usize, k) {
                    self.quantum_broadcast(t, spot as usize, round as u32)?;
                }
                Ok(())
            }
            Ev::QuantumTally { spot, k, round } => {
                if self.current(spot as usize, k) {
                    self.quantum_tally(t, spot as usize, round as u32)?;
                }
                Ok(())
            }
            Ev::Flush { c } => self.flush(t, c as usize),
            Ev::Decide { spot, k } => {
                if self.current(spot as usize, k) {
                    self.decide(t, spot as usize)?;
                }
                Ok(())
            }
            Ev::Close { spot, k } => {
                if self.current(spot as usize, k) {
                    let p = self.spots[spot as usize].pending.take().expect("current");
                    self.close(t, spot as usize, p)?;
                }
                Ok(())
            }
            Ev::NvisToggle { c } => {
                let c = c as usize;
                let (next, tx) = self.backbones[c].toggle(t, &mut self.nvis_rng[c]);
                if let Some(at) = next {
                    self.queue.schedule(at, Ev::NvisToggle { c: c as u8 })?;
                }
                if self.trace.enabled() {
                    let up = self.backbones[c].link.is_up();
                    self.trace
                        .record(t, "nvis", serde_json::json!({"c": c, "up": up}))?;
                }
                self.start_tx(c, tx)
            }
            Ev::NvisDone { c, token } => {
                let c = c as usize;
                let (done, tx) = self.backbones[c].complete(t, token, &mut self.loss_rng[c]);
                if let Some((bundle, lost)) = done {
                    if !lost {
                        self.log.transactions[bundle.payload.tx].delivered_at = Some(t);
                        if bundle.payload.counted {
                            self.log.packets_delivered += 1;
                        }
                    }
                    if self.trace.enabled() {
                        self.trace.record(
                            t,
                            "bundle",
                            serde_json::json!({"c": c, "id": bundle.id, "lost": lost}),
                        )?;
                    }
                }
                self.start_tx(c, tx)
            }
        }
    }

    fn current(&self, spot: usize, k: u32) -> bool {
        matches!(&self.spots[spot].pending, Some(p) if p.k == k)
    }

    fn start_tx(&mut self, c: usize, tx: Option<TxStart>) -> Result<(), SimError> {
        if let Some(tx) = tx {
            self.queue.schedule(
                tx.done_at,
                Ev::NvisDone {
                    c: c as u8,
                    token: tx.token,
                },
            )?;
        }
        Ok(())
    }

    fn truth(&mut self, s: usize, t: f64) -> Reading {
        let w = &self.cfg.workload;
        let season = (std::f64::consts::TAU * (t / YEAR + self.spots[s].phase)).sin();
        let temp = w.mean_temperature_c
            + w.seasonal_amplitude_c * season
            + self.noise.sample(&mut self.spots[s].rng);
        Reading::from_temperature(temp)
    }

    fn enqueue(&mut self, t: f64, cluster: usize, frame: Frame) -> Result<(), SimError> {
        self.outbox[cluster].push(frame);
        if !self.flush_due[cluster] {
            self.flush_due[cluster] = true;
            self.queue.schedule(t, Ev::Flush { c: cluster as u8 })?;
        }
        Ok(())
    }

    fn flush(&mut self, t: f64, c: usize) -> Result<(), SimError> {
        self.flush_due[c] = false;
        let mut frames = std::mem::take(&mut self.outbox[c]);
        frames.shuffle(&mut self.lora_rng[c]);
        for f in &frames {
            let fate = self.lora[c].send(t, f.bytes, &mut self.lora_rng[c]);
            let at = fate.delivered_at();
            if t >= self.warmup {
                self.log.packets_sent += 1;
                self.log.packets_delivered += at.is_some() as u64;
            }
            let ok = at.is_some_and(|a| a <= f.deadline);
            self.deliver(f, ok);
        }
        frames.clear();
        if self.outbox[c].is_empty() {
            // hand the allocation back
            self.outbox[c] = frames;
        }
        Ok(())
    }

    fn deliver(&mut self, f: &Frame, ok: bool) {
        let n = self.n;
        let Some(p) = self.spots[f.spot as usize].pending.as_mut() else {
            return;
        };
        if p.k != f.k {
            return;
        }
        match f.kind {
            FrameKind::Report {
                member,
                value,
                probe,
            } => {
                if !ok {
                    return;
                }
                p.reports.push(Report {
                    member,
                    value,
                    probe,
                });
                for observer in (0..n).filter(|&o| o != member) {
                    if let Some(own) = p.sensed[observer].value() {
                        p.observations.push(Observation {
                            observer,
                            subject: member,
                            ok: own == value,
                        });
                    }
                }
            }
            FrameKind::Vote { round, from, to } => {
                let Agreement::Classical(run) = &mut p.agreement else {
                    return;
                };
                run.record(round, from, to, ok);
                if ok && round == 1 {
                    let (observer, subject) = (p.group[to], p.group[from]);
                    if let (Some(own), Some(theirs)) =
                        (p.sensed[observer].value(), p.sensed[subject].value())
                    {
                        p.observations.push(Observation {
                            observer,
                            subject,
                            ok: own == theirs,
                        });
                    }
                }
            }
            FrameKind::Broadcast { from } => {
                if let Agreement::Quantum { heard, .. } = &mut p.agreement {
                    heard[from] = ok;
                }
            }
            FrameKind::Decision { member, value } => {
                if ok {
                    p.reports.push(Report {
                        member,
                        value,
                        probe: false,
                    });
                }
            }
        }
    }

    fn report_bytes(&self) -> u32 {
        self.cfg.workload.header_bytes + self.cfg.workload.payload_bytes
    }

    fn on_reading(&mut self, t: f64, s: usize, k: u32) -> Result<(), SimError> {
        let next = k + 1;
        let t_next = self.reading_time(s, next);
        if (next as f64) * self.cfg.workload.reading_period_s < self.horizon_readings {
            self.queue.schedule(t_next, Ev::Reading { spot: s as u32, k: next })?;
        }
        if let Some(old) = self.spots[s].pending.take() {
            self.close(t, s, old)?;
        }
        let truth = self.truth(s, t);
        let mut sensed = Vec::with_capacity(self.n);
        for m in 0..self.n {
            let spot = &mut self.spots[s];
            let mut v = sense(&self.profile, truth, &mut spot.sensors[m]);
            if matches!(spot.faults[m], Some(from) if t >= from) {
                v = Sensed::Report {
                    reading: truth.corrupted(),
                    faulty: true,
                };
            }
            sensed.push(v);
        }
        if t >= self.warmup {
            for v in &sensed {
                if let Sensed::Report { faulty, .. } = v {
                    self.log.sensed += 1;
                    self.log.faulty += *faulty as u64;
                }
            }
        }
        let probe_period = self.cfg.trust.probe_period_s;
        let spot = &mut self.spots[s];
        let period = (t / probe_period).floor() as i64;
        let probe_due = period > spot.last_probe_period;
        if probe_due {
            spot.last_probe_period = period;
        }
        let group: Vec<usize> = match &spot.ledger {
            Some(l) => l.active_members(),
            None => (0..self.n).collect(),
        };
        let outcasts: Vec<usize> = if probe_due {
            (0..self.n).filter(|m| !group.contains(m)).collect()
        } else {
            Vec::new()
        };
        let mut pending = Pending {
            k,
            t0: t,
            truth: truth.frozen,
            sensed,
            probe_due,
            group,
            agreement: Agreement::None,
            round_start: t,
            reports: Vec::new(),
            observations: Vec::new(),
        };
        if self.trace.enabled() {
            self.trace.record(
                t,
                "reading",
                serde_json::json!({"spot": s, "k": k, "truth": truth.frozen}),
            )?;
        }

        let cluster = self.spots[s].cluster;
        let deadline = t + self.cfg.workload.collect_window_s;
        // ostracized members only ever put probe frames on the air
        // in the combined modes raw readings still go out, but only for trust
        let mut order = outcasts.clone();
        if !self.mode.consensus() || self.mode.social() {
            order.extend(pending.group.iter().copied());
        }
        let trust_only = self.mode.consensus();
        let frames: Vec<Frame> = order
            .into_iter()
            .filter_map(|m| {
                pending.sensed[m].value().map(|value| Frame {
                    spot: s as u32,
                    k,
                    bytes: self.report_bytes(),
                    deadline,
                    kind: FrameKind::Report {
                        member: m,
                        value,
                        probe: trust_only || outcasts.contains(&m),
                    },
                })
            })
            .collect();
        for f in frames {
            self.enqueue(t, cluster, f)?;
        }

        let spot_id = s as u32;
        if self.mode.classical() {
            let inputs = pending.group.iter().map(|&m| pending.sensed[m].value()).collect();
            pending.agreement = Agreement::Classical(ClassicalRun::new(inputs));
            self.diag.classical_agreements += 1;
            self.spots[s].pending = Some(pending);
            self.classical_round(t, s, 1)?;
        } else if self.mode.quantum() {
            let inputs: Vec<Option<bool>> =
                pending.group.iter().map(|&m| pending.sensed[m].value()).collect();
            let needed = self.qparams.draw_rounds(&mut self.spots[s].crng);
            pending.agreement = Agreement::Quantum {
                run: QuantumRun::new(inputs),
                needed,
                sessions: Vec::new(),
                failed: false,
                heard: Vec::new(),
                coin: false,
            };
            self.diag.quantum_agreements += 1;
            self.spots[s].pending = Some(pending);
            self.quantum_round(t, s, 1)?;
        } else {
            self.spots[s].pending = Some(pending);
            self.queue.schedule(
                t + self.cfg.workload.collect_window_s,
                Ev::Close { spot: spot_id, k },
            )?;
        }
        Ok(())
    }

    fn classical_round(&mut self, t: f64, s: usize, round: usize) -> Result<(), SimError> {
        let cluster = self.spots[s].cluster;
        let d = self.cfg.consensus.round_duration_s;
        let (header, entry) = (self.cfg.workload.header_bytes, self.cfg.workload.vote_entry_bytes);
        let p = self.spots[s].pending.as_mut().expect("active transaction");
        let Agreement::Classical(run) = &p.agreement else {
            unreachable!("classical round without a classical agreement")
        };
        p.round_start = t;
        let k = p.k;
        let g = run.members();
        let rounds = run.rounds();
        let bytes = run.message_bytes(round, header, entry);
        let mut frames = Vec::new();
        for j in (0..g).filter(|&j| run.sends(j)) {
            for i in (0..g).filter(|&i| i != j) {
                frames.push(Frame {
                    spot: s as u32,
                    k,
                    bytes,
                    deadline: t + d,
                    kind: FrameKind::Vote {
                        round,
                        from: j,
                        to: i,
                    },
                });
            }
        }
        self.diag.classical_messages += frames.len() as u64;
        for f in frames {
            self.enqueue(t, cluster, f)?;
        }
        let spot = s as u32;
        if round < rounds {
            self.queue.schedule(
                t + d,
                Ev::ClassicalRound {
                    spot,
                    k,
                    round: round as u8 + 1,
                },
            )?;
        } else {
            self.queue.schedule(t + d, Ev::Decide { spot, k })?;
        }
        Ok(())
    }

    fn quantum_round(&mut self, t: f64, s: usize, round: u32) -> Result<(), SimError> {
        let cluster = self.spots[s].cluster;
        let flow = self.flows[cluster].expect("quantum modes reserve a flow");
        let mut p = self.spots[s].pending.take().expect("active transaction");
        let k = p.k;
        let mut endpoints = Vec::new();
        for (a, b) in session_pairs(p.group.len()) {
            for _ in 0..self.qparams.pairs_per_round {
                endpoints.push((sensor_node(s, p.group[a]), sensor_node(s, p.group[b])));
            }
        }
        let plane = self.plane.as_mut().expect("quantum plane");
        let before = plane.counters();
        let batch = if endpoints.is_empty() {
            Ok(None)
        } else {
            plane
                .establish_batch(
                    t,
                    &endpoints,
                    &mut self.lora[cluster],
                    flow,
                    &mut self.qrng[cluster],
                )
                .map(Some)
        };
        let after = plane.counters();
        if t >= self.warmup {
            self.log.packets_sent += after.control_transmissions - before.control_transmissions;
            self.log.packets_delivered += after.control.total() - before.control.total();
        }
        self.diag.quantum_rounds += 1;
        let Agreement::Quantum {
            sessions, failed, ..
        } = &mut p.agreement
        else {
            unreachable!("quantum round without a quantum agreement")
        };
        let spot = s as u32;
        let next = match batch {
            Ok(Some(b)) => {
                *sessions = b.sessions;
                Ev::QuantumBroadcast {
                    spot,
                    k,
                    round: round as u8,
                }
            }
            Ok(None) => Ev::QuantumBroadcast {
                spot,
                k,
                round: round as u8,
            },
            Err(QlinkError::Engine(e)) => return Err(e.into()),
            Err(_) => {
                *failed = true;
                Ev::Decide { spot, k }
            }
        };
        let at = match &p.agreement {
            Agreement::Quantum { sessions, .. } => {
                sessions.iter().map(|x| x.ready_at).fold(t, f64::max)
            }
            _ => t,
        };
        self.spots[s].pending = Some(p);
        self.queue.schedule(at, next)?;
        Ok(())
    }

    fn quantum_broadcast(&mut self, t: f64, s: usize, round: u32) -> Result<(), SimError> {
        let cluster = self.spots[s].cluster;
        let window = self.cfg.consensus.broadcast_window_s;
        let bytes = self.cfg.workload.header_bytes + self.cfg.workload.vote_entry_bytes;
        let p = self.spots[s].pending.as_mut().expect("active transaction");
        let k = p.k;
        let Agreement::Quantum {
            run,
            sessions,
            heard,
            coin,
            ..
        } = &mut p.agreement
        else {
            unreachable!("quantum broadcast without a quantum agreement")
        };
        let qrng = &mut self.qrng[cluster];
        *coin = false;
        for (idx, session) in sessions.iter_mut().enumerate() {
            let (a, _) = md_measure(session, Basis::Z, qrng)?;
            if idx == 0 {
                *coin = a;
            }
        }
        sessions.clear();
        let g = run.members();
        *heard = vec![false; g];
        let frames: Vec<Frame> = (0..g)
            .filter(|&j| run.sends(j))
            .map(|j| Frame {
                spot: s as u32,
                k,
                bytes,
                deadline: t + window,
                kind: FrameKind::Broadcast { from: j },
            })
            .collect();
        self.diag.quantum_broadcasts += frames.len() as u64;
        for f in frames {
            self.enqueue(t, cluster, f)?;
        }
        self.queue.schedule(
            t + window,
            Ev::QuantumTally {
                spot: s as u32,
                k,
                round: round as u8,
            },
        )?;
        Ok(())
    }

    fn quantum_tally(&mut self, t: f64, s: usize, round: u32) -> Result<(), SimError> {
        let max_rounds = self.qparams.max_rounds;
        let p = self.spots[s].pending.as_mut().expect("active transaction");
        let Agreement::Quantum {
            run,
            needed,
            failed,
            heard,
            coin,
            ..
        } = &mut p.agreement
        else {
            unreachable!("quantum tally without a quantum agreement")
        };
        let g = run.members();
        let values: Vec<Option<bool>> = (0..g).map(|j| run.value(j)).collect();
        run.round(|j, _| heard[j], |j, _| values[j], *coin);
        if round == 1 {
            for j in (0..g).filter(|&j| heard[j]) {
                let subject = p.group[j];
                let Some(theirs) = p.sensed[subject].value() else {
                    continue;
                };
                for i in (0..g).filter(|&i| i != j) {
                    let observer = p.group[i];
                    if let Some(own) = p.sensed[observer].value() {
                        p.observations.push(Observation {
                            observer,
                            subject,
                            ok: own == theirs,
                        });
                    }
                }
            }
        }
        match *needed {
            Some(r) if r == round => self.decide(t, s),
            None if round >= max_rounds => {
                *failed = true;
                self.decide(t, s)
            }
            _ => self.quantum_round(t, s, round + 1),
        }
    }

    fn decide(&mut self, t: f64, s: usize) -> Result<(), SimError> {
        let cluster = self.spots[s].cluster;
        let p = self.spots[s].pending.take().expect("active transaction");
        let decisions: Vec<(usize, Option<bool>)> = match &p.agreement {
            Agreement::Classical(run) => (0..run.members())
                .filter(|&i| run.sends(i))
                .map(|i| (p.group[i], run.decide(i)))
                .collect(),
            Agreement::Quantum { run, failed, .. } => (0..run.members())
                .filter(|&i| run.sends(i))
                .map(|i| (p.group[i], if *failed { None } else { run.decide(i) }))
                .collect(),
            Agreement::None => Vec::new(),
        };
        let reporters: Vec<(usize, Option<bool>)> = if self.mode.social() {
            decisions
        } else {
            decisions.into_iter().take(1).collect()
        };
        if reporters.iter().all(|(_, d)| d.is_none()) {
            self.diag.agreement_failures += 1;
        }
        let deadline = t + self.cfg.workload.collect_window_s;
        let k = p.k;
        self.spots[s].pending = Some(p);
        for (member, decision) in reporters {
            let Some(value) = decision else { continue };
            let frame = Frame {
                spot: s as u32,
                k,
                bytes: self.report_bytes(),
                deadline,
                kind: FrameKind::Decision { member, value },
            };
            self.enqueue(t, cluster, frame)?;
        }
        self.queue.schedule(
            deadline,
            Ev::Close { spot: s as u32, k },
        )?;
        Ok(())
    }

    fn close(&mut self, t: f64, s: usize, p: Pending) -> Result<(), SimError> {
        let spot = &mut self.spots[s];
        if let Some(ledger) = spot.ledger.as_mut() {
            for o in &p.observations {
                if ledger.exchanges(o.observer, o.subject, p.probe_due) {
                    ledger.update_trust(o.observer, o.subject, o.ok);
                }
            }
            ledger.end_period();
            if self.record_trust {
                for m in 0..ledger.members() {
                    self.trust_series.push(TrustSample {
                        t_days: p.t0 / DAY,
                        spot: s as u32,
                        member: m as u32,
                        reputation: ledger.reputation(m),
                        ostracized: ledger.is_ostracized(m),
                    });
                }
            }
        }
        let candidates = p.reports.iter().filter(|r| !r.probe);
        let selected = match self.mode {
            OperationMode::Standard => candidates.filter(|r| r.member == 0).map(|r| r.value).next(),
            OperationMode::Consensus | OperationMode::QuantumConsensus => {
                candidates.map(|r| r.value).next()
            }
            _ => {
                let ledger = spot.ledger.as_ref().expect("social modes keep a ledger");
                let reports: Vec<&Report> = candidates.collect();
                ledger
                    .most_trusted(reports.iter().map(|r| r.member))
                    .and_then(|m| reports.iter().find(|r| r.member == m))
                    .map(|r| r.value)
            }
        };
        let tx = self.log.transactions.len();
        self.log.transactions.push(TransactionRecord {
            spot: s as u32,
            generated_at: p.t0,
            delivered_at: None,
            correct: selected == Some(p.truth),
        });
        if selected.is_none() {
            return Ok(());
        }
        let bytes = self.cfg.nvis.bundle_header_bytes as u64
            + p.reports.len() as u64 * self.cfg.workload.payload_bytes as u64;
        let counted = p.t0 >= self.warmup;
        if counted {
            self.log.packets_sent += 1;
        }
        let cluster = spot.cluster;
        let id = self.next_bundle;
        self.next_bundle += 1;
        let bundle = Bundle {
            id,
            bytes: bytes.min(self.cfg.nvis.dtn_capacity_bytes),
            created_at: t,
            payload: Payload { tx, counted },
        };
        let (_evicted, start) = self.backbones[cluster].store(t, bundle)?;
        self.start_tx(cluster, start)
    }
}
