//! Interaction logging and offline evaluation.

mod log;
mod ope;
mod replay;

pub use log::{parse_record, read_log, serialize_record, InteractionLog, RecordSink};
pub use ope::{
    ips_estimate, ips_estimate_with, snips_estimate, snips_estimate_with, FnTarget, TargetPolicy,
    DEFAULT_MIN_PROPENSITY,
};
pub use replay::{replay, replay_file, ReplayMetrics, ReplayRow, ReplaySetup};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("i/o error: {0}")]
    Io(String),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("record {ordinal}: propensity {propensity} outside [floor, 1]")]
    Propensity { ordinal: u64, propensity: f64 },
    #[error("no records with a reward")]
    NoUsableRecords,
    #[error("target policy never agrees with the logged actions")]
    ZeroWeight,
    #[error("target policy: {0}")]
    Target(String),
    #[error("policy: {0}")]
    Policy(String),
    #[error("record {ordinal}: {message}")]
    Replay { ordinal: u64, message: String },
}
