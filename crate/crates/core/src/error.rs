use std::io;

use thiserror::Error;

use crate::skeleton::JointId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("joint {0:?} is missing")]
    MissingJoint(JointId),
    #[error("degenerate limb: segment length {0} px is below threshold")]
    DegenerateLimb(f64),
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("parse error on line {line}: {source}")]
    ParseLine {
        line: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("clock skew: timestamp {now} ms is earlier than {previous} ms")]
    ClockSkew { previous: u64, now: u64 },
    #[error("not enough head joints to form a box ({0} present)")]
    InsufficientJoints(usize),
    #[error("distance model is not initialized")]
    UninitializedModel,
    #[error("dataset is degenerate: {0}")]
    DegenerateDataset(String),
    #[error("invalid model file: {0}")]
    ModelFormat(String),
    #[error("unknown command: {0:?}")]
    UnknownCommand(String),
    #[error("argument out of range: {0}")]
    OutOfRange(String),
    #[error("unknown topic {0:?}")]
    UnknownTopic(String),
    #[error("schema mismatch on topic {topic}: expected {expected}, got {got}")]
    SchemaMismatch {
        topic: String,
        expected: &'static str,
        got: &'static str,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}
