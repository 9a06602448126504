use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CeiError {
    #[error("unknown condition label `{0}`")]
    UnknownCondition(String),

    #[error("invalid configuration: {field}: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("acceleration memory is empty")]
    EmptyMemory,

    #[error("regression design is rank deficient: {0}")]
    RankDeficient(String),

    #[error("{path}: rejected ({reason}): {detail}")]
    Rejected {
        path: PathBuf,
        reason: RejectReason,
        detail: String,
    },

    #[error("no trial logs found in {0}")]
    NoTrialLogs(PathBuf),

    #[error("corrupt trial log {path}: {detail}")]
    CorruptLog { path: PathBuf, detail: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Machine-readable reason for rejecting an ingested data file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    MissingColumn,
    NonUniformTimestamps,
    UnitMismatch,
    BadValue,
    UnknownCondition,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::MissingColumn => "missing_column",
            RejectReason::NonUniformTimestamps => "non_uniform_timestamps",
            RejectReason::UnitMismatch => "unit_mismatch",
            RejectReason::BadValue => "bad_value",
            RejectReason::UnknownCondition => "unknown_condition",
        }
    }
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub type Result<T, E = CeiError> = std::result::Result<T, E>;
