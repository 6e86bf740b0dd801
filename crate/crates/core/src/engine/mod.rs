//! Event kernel and the classical channels: LoRa access clusters, the NVIS
//! backbone and the DTN buffer that rides on it.

mod backbone;
mod dtn;
mod kernel;
mod lora;
mod nvis;
mod rng;

pub use backbone::{Backbone, BackboneCounters, TxStart};
pub use dtn::{Bundle, DtnBuffer, DtnCounters};
pub use kernel::EventQueue;
pub use lora::{
    DropCause, FlowId, FrameFate, LinkCounters, LoraConfig, LoraLink, DEFAULT_LORA_BITRATE,
};
pub use nvis::{simulate_up_fraction, NvisLink, NvisState};
pub use rng::{substream, StreamKind};

use std::io::Write;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("event at t={at} is before the clock (t={now})")]
    PastEvent { at: f64, now: f64 },
    #[error("invalid channel parameter: {0}")]
    Param(String),
    #[error("reservation of {requested} bps rejected, residual capacity {residual} bps")]
    Admission { requested: f64, residual: f64 },
    #[error("unknown reserved flow {0}")]
    UnknownFlow(usize),
    #[error("bundle of {bytes} bytes cannot fit a {capacity}-byte buffer")]
    BundleTooLarge { bytes: u64, capacity: u64 },
    #[error("trace output: {0}")]
    Trace(#[from] std::io::Error),
}

/// Optional newline-delimited JSON event trace.
#[derive(Default)]
pub struct Trace {
    out: Option<Box<dyn Write + Send>>,
}

impl Trace {
    pub fn new(out: Box<dyn Write + Send>) -> Self {
        Self { out: Some(out) }
    }

    pub fn disabled() -> Self {
        Self { out: None }
    }

    pub fn enabled(&self) -> bool {
        self.out.is_some()
    }

    pub fn record(&mut self, time: f64, kind: &str, detail: serde_json::Value) -> Result<(), EngineError> {
        if let Some(out) = self.out.as_mut() {
            let line = serde_json::json!({ "t": time, "kind": kind, "detail": detail });
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), EngineError> {
        if let Some(out) = self.out.as_mut() {
            out.flush()?;
        }
        Ok(())
    }
}
