//! Scenarios, seeded runs with JSON-lines trace logs, replay, and fuzzing.

mod fuzz;
mod run;
mod scenario;

use thiserror::Error;

use crate::net::NetError;

pub use fuzz::{fuzz, FuzzConfig, FuzzReport};
pub use run::{log_pairing, log_turn_discipline, parse_log, replay, run_scenario, LogRecord, RunSummary, Status, TOOL};
pub use scenario::{Delivery, FaultSpec, PlannedData, Prepared, Scenario, SequenceAllocator};

/// Scenario files shipped with the crate.
pub mod shipped {
    pub const ACK_WITHOUT_DATA: &str = include_str!("../../scenarios/ack-without-data.json");
    pub const OUT_OF_TURN: &str = include_str!("../../scenarios/out-of-turn.json");
    pub const CYCLIC_5: &str = include_str!("../../scenarios/cyclic-5.json");
    pub const SIMPLE_4: &str = include_str!("../../scenarios/simple-4.json");
    pub const BROADCAST_3: &str = include_str!("../../scenarios/broadcast-3.json");
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("cannot parse scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario field `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("step {step}: {source}")]
    Step { step: u64, source: NetError },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad trace log: {0}")]
    Log(String),
    #[error("replay diverged at line {line}:\n  logged:   {expected}\n  replayed: {actual}")]
    Replay { line: usize, expected: String, actual: String },
}
