//! Trustworthy telemetry over a LoRa/NVIS/DTN network with classical and
//! quantum consensus planes.

// `!(x > 0.0)` is how parameter checks reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod qcore;
pub mod qlink;
pub mod ralgebra;
pub mod config;
pub mod metrics;
pub mod sim;
pub mod trustnet;
pub mod verify;
pub mod cli;
