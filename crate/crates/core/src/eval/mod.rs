//! Identification and verification metrics and the repeated-split protocol.

mod metrics;
mod protocol;

pub use metrics::{
    auc, cmc, genuine_ranks, rank1, roc, separation, split_scores, vr_at_far, OperatingPoint,
};
pub use protocol::{EvalReport, Split, SplitMetrics, SplitPlan};

/// Default false accept rate for verification reporting (0.1%).
pub const DEFAULT_FAR: f64 = 0.001;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("shape mismatch for {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("probe subject {0} has no gallery entry")]
    MissingSubject(String),
    #[error("no {0}")]
    Empty(&'static str),
    #[error("NaN score")]
    NonFinite,
    #[error("false accept rate {0} outside [0, 1]")]
    BadFar(f64),
    #[error("invalid split plan: {0}")]
    Plan(String),
}
