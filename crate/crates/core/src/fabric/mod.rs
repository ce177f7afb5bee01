//! R1/R2/R3 router models and the discrete-event fabric simulator.
//!
//! Time is kept in integer picoseconds and energy in integer femtojoules so
//! that latency sums and the energy ledger are exact.

pub mod config;
pub mod engine;
pub mod queue;
pub mod router;
pub mod stats;

pub use config::{EnergyTable, FabricConfig, Latencies, Supply};
pub use engine::{
    Delivery, Engine, ExternalEvent, Fault, Fired, Payload, Program, RasterEntry, TraceRecord,
};
pub use queue::EventQueue;
pub use router::{
    r1_dispatch, r1_emit, r2_route, r3_route, trace_route, Port, R1Decision, R2Decision,
    R2Direction, RouteFault, RouteTrace, SramSlots, SRAM_WORDS,
};
pub use stats::{Counters, LatencyHistogram, SimStats};

use crate::neuro::NeuroError;
use thiserror::Error;

/// Simulated time in picoseconds.
pub type SimTime = u64;

#[derive(Debug, Error)]
pub enum FabricError {
    #[error("invalid fabric config: {0}")]
    Config(String),
    #[error("invalid address: {0}")]
    Address(String),
    #[error("cannot run backwards to t = {t_end} ps (now {now} ps)")]
    TimeReversal { t_end: SimTime, now: SimTime },
    #[error(transparent)]
    Neuro(#[from] NeuroError),
}
