use std::collections::VecDeque;

use rand::Rng;
use serde::Serialize;

use super::EngineError;

pub const DEFAULT_LORA_BITRATE: f64 = 5470.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DropCause {
    Congestion,
    Channel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrameFate {
    Delivered { at: f64 },
    Dropped { cause: DropCause, at: f64 },
}

impl FrameFate {
    pub fn delivered_at(&self) -> Option<f64> {
        match self {
            FrameFate::Delivered { at } => Some(*at),
            FrameFate::Dropped { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LinkCounters {
    pub sent: u64,
    pub delivered: u64,
    pub dropped_congestion: u64,
    pub dropped_channel: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlowId(pub usize);

#[derive(Debug, Clone, Copy)]
struct InService {
    done: f64,
    bytes: u32,
    ok: bool,
}

/// FIFO server with a byte-bounded queue. Delivery instants are fixed at
/// enqueue time, so sending a frame is O(1) amortized.
#[derive(Debug, Clone)]
struct Server {
    rate_bps: f64,
    capacity_bytes: Option<u64>,
    backlog: VecDeque<InService>,
    queued_bytes: u64,
    busy_until: f64,
    counters: LinkCounters,
}

impl Server {
    fn new(rate_bps: f64, capacity_bytes: Option<u64>) -> Self {
        Self {
            rate_bps,
            capacity_bytes,
            backlog: VecDeque::new(),
            queued_bytes: 0,
            busy_until: 0.0,
            counters: LinkCounters::default(),
        }
    }

    fn settle(&mut self, now: f64) {
        while let Some(f) = self.backlog.front() {
            if f.done > now {
                break;
            }
            self.queued_bytes -= f.bytes as u64;
            if f.ok {
                self.counters.delivered += 1;
            } else {
                self.counters.dropped_channel += 1;
            }
            self.backlog.pop_front();
        }
    }

    fn push(&mut self, now: f64, bytes: u32, ok: bool) -> Option<f64> {
        self.settle(now);
        self.counters.sent += 1;
        if let Some(cap) = self.capacity_bytes {
            // a fully reserved link leaves nothing for best-effort traffic
            if self.rate_bps <= 0.0 || self.queued_bytes + bytes as u64 > cap {
                self.counters.dropped_congestion += 1;
                return None;
            }
        }
        let start = self.busy_until.max(now);
        let done = start + 8.0 * bytes as f64 / self.rate_bps;
        self.busy_until = done;
        self.queued_bytes += bytes as u64;
        self.backlog.push_back(InService { done, bytes, ok });
        Some(done)
    }
}

#[derive(Debug, Clone)]
pub struct LoraConfig {
    pub bitrate_bps: f64,
    pub frame_error: f64,
    pub queue_capacity_bytes: u64,
}

impl Default for LoraConfig {
    fn default() -> Self {
        Self {
            bitrate_bps: DEFAULT_LORA_BITRATE,
            frame_error: 0.0,
            queue_capacity_bytes: 4096,
        }
    }
}

/// Shared LoRa medium of one access cluster. Best-effort traffic uses
/// whatever bitrate is not reserved; each admitted flow gets its own
/// unbounded server at its reserved rate and is never congestion-dropped.
#[derive(Debug, Clone)]
pub struct LoraLink {
    bitrate_bps: f64,
    frame_error: f64,
    data: Server,
    flows: Vec<Server>,
    reserved_bps: f64,
}

impl LoraLink {
    pub fn new(cfg: &LoraConfig) -> Result<Self, EngineError> {
        if !(cfg.bitrate_bps > 0.0) {
            return Err(EngineError::Param(format!(
                "LoRa bitrate must be positive, got {}",
                cfg.bitrate_bps
            )));
        }
        if !(0.0..=1.0).contains(&cfg.frame_error) {
            return Err(EngineError::Param(format!(
                "frame error probability {} outside [0,1]",
                cfg.frame_error
            )));
        }
        Ok(Self {
            bitrate_bps: cfg.bitrate_bps,
            frame_error: cfg.frame_error,
            data: Server::new(cfg.bitrate_bps, Some(cfg.queue_capacity_bytes)),
            flows: Vec::new(),
            reserved_bps: 0.0,
        })
    }

    pub fn bitrate(&self) -> f64 {
        self.bitrate_bps
    }

    pub fn residual_bps(&self) -> f64 {
        self.bitrate_bps - self.reserved_bps
    }

    /// Admission control for a reserved flow.
    pub fn reserve_bandwidth(&mut self, max_rate_bps: f64) -> Result<FlowId, EngineError> {
        let residual = self.residual_bps();
        if !(max_rate_bps > 0.0) || max_rate_bps > residual {
            return Err(EngineError::Admission {
                requested: max_rate_bps,
                residual,
            });
        }
        self.reserved_bps += max_rate_bps;
        self.data.rate_bps = self.residual_bps();
        self.flows.push(Server::new(max_rate_bps, None));
        Ok(FlowId(self.flows.len() - 1))
    }

    /// Best-effort frame.
    pub fn send<R: Rng + ?Sized>(&mut self, now: f64, frame_bytes: u32, rng: &mut R) -> FrameFate {
        let ok = self.frame_error == 0.0 || rng.random::<f64>() >= self.frame_error;
        match self.data.push(now, frame_bytes.max(1), ok) {
            None => FrameFate::Dropped {
                cause: DropCause::Congestion,
                at: now,
            },
            Some(done) if ok => FrameFate::Delivered { at: done },
            Some(done) => FrameFate::Dropped {
                cause: DropCause::Channel,
                at: done,
            },
        }
    }

    /// Sends `count` frames on a reserved flow, retransmitting after channel
    /// errors. Returns the instant the last frame arrives and the number of
    /// transmissions used.
    pub fn send_reserved<R: Rng + ?Sized>(
        &mut self,
        now: f64,
        flow: FlowId,
        count: u32,
        frame_bytes: u32,
        rng: &mut R,
    ) -> Result<(f64, u64), EngineError> {
        if self.frame_error >= 1.0 {
            return Err(EngineError::Param(
                "reserved flow cannot deliver with frame error 1".into(),
            ));
        }
        let server = self
            .flows
            .get_mut(flow.0)
            .ok_or(EngineError::UnknownFlow(flow.0))?;
        let mut last = now;
        let mut tx = 0u64;
        for _ in 0..count {
            loop {
                let ok = self.frame_error == 0.0 || rng.random::<f64>() >= self.frame_error;
                let done = server
                    .push(now, frame_bytes.max(1), ok)
                    .expect("reserved flows are unbounded");
                tx += 1;
                last = done;
                if ok {
                    break;
                }
            }
        }
        Ok((last, tx))
    }

    /// Accounts for everything completed by `now`.
    pub fn settle(&mut self, now: f64) {
        self.data.settle(now);
        for f in &mut self.flows {
            f.settle(now);
        }
    }

    pub fn data_counters(&self) -> LinkCounters {
        self.data.counters
    }

    pub fn flow_counters(&self, flow: FlowId) -> Option<LinkCounters> {
        self.flows.get(flow.0).map(|f| f.counters)
    }

    /// Frames still queued or in service on the best-effort server.
    pub fn in_flight(&self) -> u64 {
        self.data.backlog.len() as u64
    }

    pub fn flow_in_flight(&self, flow: FlowId) -> u64 {
        self.flows.get(flow.0).map_or(0, |f| f.backlog.len() as u64)
    }
}
