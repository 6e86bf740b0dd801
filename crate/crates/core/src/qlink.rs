//! Quantum management plane: Bell-pair generation over links, swapping and
//! purification control traffic, and measure-directly sessions.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{EngineError, FlowId, LoraLink};
use crate::qcore::{
    bloch_to_density, decohere, fidelity, swap_chain_fidelity, BlochVector, DecayRates, EprKind,
    Gate, QcoreError, QuantumState,
};
use crate::ralgebra::{best_path, LinkLabel, NodeId, QuantumTopology, Route, RoutingError};

#[derive(Debug, Error)]
pub enum QlinkError {
    #[error("route: {0}")]
    Route(#[from] RoutingError),
    #[error("fidelity target unreachable: {0}")]
    Purification(#[from] QcoreError),
    #[error("session {0} already measured")]
    Consumed(u64),
    #[error("control traffic: {0}")]
    Engine(#[from] EngineError),
    #[error("invalid quantum parameter: {0}")]
    Param(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QlinkParams {
    /// Success probability of one generation attempt.
    pub p_ent: f64,
    pub attempt_period_s: f64,
    /// Fidelity of a freshly generated elementary pair.
    pub f0: f64,
    pub f_target: f64,
    pub gamma_x: f64,
    pub gamma_y: f64,
    pub gamma_z: f64,
    pub max_purify_rounds: u32,
    /// Fixed control cost added to every link label's overhead.
    pub control_cost_per_hop: f64,
    pub control_frame_bytes: u32,
    /// Bandwidth reserved on each LoRa cluster for control frames.
    pub reserved_bps: f64,
}

impl Default for QlinkParams {
    fn default() -> Self {
        Self {
            p_ent: 0.5,
            attempt_period_s: 0.1,
            f0: 0.97,
            f_target: 0.9,
            gamma_x: 1e-5,
            gamma_y: 1e-5,
            gamma_z: 1e-5,
            max_purify_rounds: 4,
            control_cost_per_hop: 2.0,
            control_frame_bytes: 12,
            reserved_bps: 1000.0,
        }
    }
}

impl QlinkParams {
    pub fn validate(&self) -> Result<(), QlinkError> {
        let bad = |m: &str| Err(QlinkError::Param(m.to_string()));
        if !(self.p_ent > 0.0 && self.p_ent <= 1.0) {
            return bad("p_ent must be in (0,1]");
        }
        if !(self.attempt_period_s > 0.0) {
            return bad("attempt_period_s must be positive");
        }
        if !(self.f0 > 0.5 && self.f0 <= 1.0) {
            return bad("f0 must be in (0.5,1]");
        }
        if !(self.f_target > 0.5 && self.f_target < 1.0) {
            return bad("f_target must be in (0.5,1)");
        }
        self.rates()?;
        if !(self.control_cost_per_hop >= 0.0) {
            return bad("control_cost_per_hop must be non-negative");
        }
        if self.control_frame_bytes == 0 {
            return bad("control_frame_bytes must be positive");
        }
        if !(self.reserved_bps > 0.0) {
            return bad("reserved_bps must be positive");
        }
        Ok(())
    }

    pub fn rates(&self) -> Result<DecayRates, QlinkError> {
        Ok(DecayRates::new(self.gamma_x, self.gamma_y, self.gamma_z)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntanglementAttempt {
    pub link: (NodeId, NodeId),
    pub p_ent: f64,
    pub attempt_period_s: f64,
    pub f0: f64,
}

impl EntanglementAttempt {
    pub fn pair_rate(&self) -> f64 {
        self.p_ent / self.attempt_period_s
    }

    /// Attempts until one success.
    pub fn attempts<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        if self.p_ent >= 1.0 {
            return 1;
        }
        let u: f64 = rng.random();
        1 + ((1.0 - u).ln() / (1.0 - self.p_ent).ln()).floor() as u64
    }
}

/// Routing label for one link: pair rate plus expected purification pairs
/// and the per-hop control constant.
pub fn label_from_link(
    att: &EntanglementAttempt,
    f_target: f64,
    max_rounds: u32,
    control_cost_per_hop: f64,
) -> Result<LinkLabel, QlinkError> {
    let purification = if att.f0 >= f_target {
        0.0
    } else {
        swap_chain_fidelity(&[att.f0], f_target, max_rounds)?.pairs_consumed as f64
    };
    Ok(LinkLabel::new(
        att.pair_rate(),
        purification + control_cost_per_hop,
    )?)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ControlCounts {
    pub aec: u64,
    pub esc: u64,
    pub pc: u64,
}

impl ControlCounts {
    pub fn total(&self) -> u64 {
        self.aec + self.esc + self.pc
    }

    fn add(&mut self, o: ControlCounts) {
        self.aec += o.aec;
        self.esc += o.esc;
        self.pc += o.pc;
    }
}

/// Resources needed for one end-to-end pair over a fixed path.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionPlan {
    pub hops: usize,
    pub end_fidelity: f64,
    pub pairs_consumed: u64,
    pub pairs_per_link: Vec<u64>,
    pub control: ControlCounts,
}

pub fn plan_session(
    link_fidelities: &[f64],
    f_target: f64,
    max_rounds: u32,
) -> Result<SessionPlan, QlinkError> {
    let chain = swap_chain_fidelity(link_fidelities, f_target, max_rounds)?;
    let pairs_per_link = chain
        .link_fidelities
        .iter()
        .zip(link_fidelities)
        .map(|(&after, &before)| {
            let mut f = before;
            let mut pairs = 1u64;
            while f < after {
                f = crate::qcore::purify(f).expect("valid fidelity");
                pairs *= 2;
            }
            pairs
        })
        .collect();
    let hops = link_fidelities.len();
    Ok(SessionPlan {
        hops,
        end_fidelity: chain.end_fidelity,
        pairs_consumed: chain.pairs_consumed,
        pairs_per_link,
        control: ControlCounts {
            aec: 2 * hops as u64,
            esc: hops as u64 - 1,
            pc: 2 * chain.purification_rounds as u64,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    Z,
    X,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EprSession {
    pub id: u64,
    pub path: Vec<NodeId>,
    pub kind: EprKind,
    pub end_fidelity: f64,
    pub pairs_consumed: u64,
    pub control: ControlCounts,
    pub ready_at: f64,
    consumed: bool,
}

impl EprSession {
    pub fn classical_control_messages(&self) -> u64 {
        self.control.total()
    }

    pub fn hops(&self) -> usize {
        self.path.len().saturating_sub(1)
    }

    pub fn is_consumed(&self) -> bool {
        self.consumed
    }
}

/// Measures both halves of the pair immediately. The pair is treated as a
/// Werner state of the session fidelity: ideal with weight (4F-1)/3, white
/// noise otherwise.
pub fn md_measure<R: Rng + ?Sized>(
    session: &mut EprSession,
    basis: Basis,
    rng: &mut R,
) -> Result<(bool, bool), QlinkError> {
    if session.consumed {
        return Err(QlinkError::Consumed(session.id));
    }
    session.consumed = true;
    let ideal_weight = ((4.0 * session.end_fidelity - 1.0) / 3.0).clamp(0.0, 1.0);
    if ideal_weight < 1.0 && rng.random::<f64>() >= ideal_weight {
        return Ok((rng.random(), rng.random()));
    }
    let mut pair = session.kind.state();
    if basis == Basis::X {
        pair.apply_mut(Gate::H(0))?;
        pair.apply_mut(Gate::H(1))?;
    }
    let (outcome, _) = pair.measure(&[0, 1], None, rng)?;
    Ok((outcome & 0b10 != 0, outcome & 0b01 != 0))
}

/// Fidelity kept by a pair that idles for `t` seconds, taken as the
/// single-qubit |+> fidelity after decoherence.
pub fn retention(t: f64, rates: DecayRates) -> Result<f64, QlinkError> {
    let plus = QuantumState::qubit(
        num_complex::Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        num_complex::Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
    )?;
    let rho = bloch_to_density(BlochVector::new(1.0, 0.0, 0.0)?);
    let aged = decohere(&rho, t.max(0.0), rates)?;
    Ok(fidelity(&plus, &aged)?)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PlaneCounters {
    pub sessions: u64,
    pub failures: u64,
    pub pairs_consumed: u64,
    pub control: ControlCounts,
    pub control_transmissions: u64,
}

/// Result of establishing several sessions at once.
#[derive(Debug, Clone)]
pub struct SessionBatch {
    pub sessions: Vec<EprSession>,
    pub ready_at: f64,
}

/// Per-run quantum plane over a fixed topology. Routes are computed once
/// and reused.
pub struct QuantumPlane {
    topo: QuantumTopology,
    params: QlinkParams,
    rates: DecayRates,
    routes: HashMap<(NodeId, NodeId), Route>,
    plans: HashMap<usize, SessionPlan>,
    next_id: u64,
    counters: PlaneCounters,
}

impl QuantumPlane {
    pub fn new(topo: QuantumTopology, params: QlinkParams) -> Result<Self, QlinkError> {
        params.validate()?;
        Ok(Self {
            topo,
            rates: params.rates()?,
            params,
            routes: HashMap::new(),
            plans: HashMap::new(),
            next_id: 0,
            counters: PlaneCounters::default(),
        })
    }

    pub fn params(&self) -> &QlinkParams {
        &self.params
    }

    pub fn counters(&self) -> PlaneCounters {
        self.counters
    }

    pub fn route(&mut self, src: NodeId, dst: NodeId) -> Result<Route, QlinkError> {
        if let Some(r) = self.routes.get(&(src, dst)) {
            return Ok(r.clone());
        }
        let r = best_path(&self.topo, src, dst)?;
        self.routes.insert((src, dst), r.clone());
        Ok(r)
    }

    fn plan(&mut self, hops: usize, target: f64) -> Result<SessionPlan, QlinkError> {
        if target == self.params.f_target {
            if let Some(p) = self.plans.get(&hops) {
                return Ok(p.clone());
            }
        }
        let fids = vec![self.params.f0; hops.max(1)];
        let plan = plan_session(&fids, target.min(1.0), self.params.max_purify_rounds)?;
        if target == self.params.f_target {
            self.plans.insert(hops, plan.clone());
        }
        Ok(plan)
    }

    fn attempt(&self) -> EntanglementAttempt {
        EntanglementAttempt {
            link: (NodeId(0), NodeId(0)),
            p_ent: self.params.p_ent,
            attempt_period_s: self.params.attempt_period_s,
            f0: self.params.f0,
        }
    }

    pub fn establish_session<R: Rng + ?Sized>(
        &mut self,
        now: f64,
        src: NodeId,
        dst: NodeId,
        lora: &mut LoraLink,
        flow: FlowId,
        rng: &mut R,
    ) -> Result<EprSession, QlinkError> {
        let mut batch = self.establish_batch(now, &[(src, dst)], lora, flow, rng)?;
        Ok(batch.sessions.pop().expect("one session requested"))
    }

    /// Establishes one session per endpoint pair. Control frames for the
    /// whole batch go out on the reserved flow at `now`; pairs decohere
    /// until the last control frame lands.
    pub fn establish_batch<R: Rng + ?Sized>(
        &mut self,
        now: f64,
        endpoints: &[(NodeId, NodeId)],
        lora: &mut LoraLink,
        flow: FlowId,
        rng: &mut R,
    ) -> Result<SessionBatch, QlinkError> {
        let mut routes = Vec::with_capacity(endpoints.len());
        let mut link_pairs: HashMap<(NodeId, NodeId), u64> = HashMap::new();
        let mut control = ControlCounts::default();
        let mut plans = Vec::with_capacity(endpoints.len());
        for &(src, dst) in endpoints {
            let route = match self.route(src, dst) {
                Ok(r) => r,
                Err(e) => {
                    self.counters.failures += 1;
                    return Err(e);
                }
            };
            let hops = route.path.len().saturating_sub(1);
            let plan = match self.plan(hops, self.params.f_target) {
                Ok(p) => p,
                Err(e) => {
                    self.counters.failures += 1;
                    return Err(e);
                }
            };
            for (w, &pairs) in route.path.windows(2).zip(&plan.pairs_per_link) {
                let key = if w[0] < w[1] { (w[0], w[1]) } else { (w[1], w[0]) };
                *link_pairs.entry(key).or_default() += pairs;
            }
            control.add(plan.control);
            routes.push(route);
            plans.push(plan);
        }
        // links generate in parallel, pairs on one link one after another
        let att = self.attempt();
        let mut keys: Vec<_> = link_pairs.into_iter().collect();
        keys.sort_unstable_by_key(|(k, _)| *k);
        let mut generation = 0.0f64;
        for (_, pairs) in keys {
            let attempts: u64 = (0..pairs).map(|_| att.attempts(rng)).sum();
            generation = generation.max(attempts as f64 * att.attempt_period_s);
        }
        let (control_done, tx) = lora.send_reserved(
            now,
            flow,
            control.total() as u32,
            self.params.control_frame_bytes,
            rng,
        )?;
        let mut ready_at = control_done.max(now + generation);
        let keep = retention(ready_at - now, self.rates)?;

        let mut sessions = Vec::with_capacity(endpoints.len());
        for (route, mut plan) in routes.into_iter().zip(plans) {
            if plan.end_fidelity * keep < self.params.f_target {
                // pump harder so the aged pair still meets the target
                let boosted = self.params.f_target / keep;
                let extra = if boosted < 1.0 {
                    self.plan(plan.hops, boosted)
                } else {
                    Err(QlinkError::Param("decoherence exceeds the fidelity budget".into()))
                };
                match extra {
                    Ok(p) => {
                        let more = ControlCounts {
                            pc: p.control.pc.saturating_sub(plan.control.pc),
                            ..Default::default()
                        };
                        let (done, tx2) = lora.send_reserved(
                            now,
                            flow,
                            more.total() as u32,
                            self.params.control_frame_bytes,
                            rng,
                        )?;
                        ready_at = ready_at.max(done);
                        self.counters.control_transmissions += tx2;
                        self.counters.control.add(more);
                        plan.control.add(more);
                        plan.pairs_consumed = p.pairs_consumed;
                        plan.end_fidelity = p.end_fidelity;
                    }
                    Err(e) => {
                        self.counters.failures += 1;
                        self.counters.control_transmissions += tx;
                        self.counters.control.add(control);
                        return Err(e);
                    }
                }
            }
            self.counters.sessions += 1;
            self.counters.pairs_consumed += plan.pairs_consumed;
            sessions.push(EprSession {
                id: self.next_id,
                path: route.path,
                kind: EprKind::PhiPlus,
                end_fidelity: plan.end_fidelity * keep,
                pairs_consumed: plan.pairs_consumed,
                control: plan.control,
                ready_at,
                consumed: false,
            });
            self.next_id += 1;
        }
        self.counters.control_transmissions += tx;
        self.counters.control.add(control);
        for s in &mut sessions {
            s.ready_at = ready_at;
        }
        Ok(SessionBatch { sessions, ready_at })
    }
}
