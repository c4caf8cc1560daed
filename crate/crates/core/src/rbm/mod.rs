//! Single-modality restricted Boltzmann machines: energies, conditionals,
//! block Gibbs sampling, contrastive-divergence training, whitening, and
//! exact enumeration for tiny models.

mod exact;
mod normalize;
mod params;
mod sampling;
mod train;

pub use exact::{
    binary_joint_table, boltzmann, hidden_log_weights, hidden_marginal, log_partition_exact,
    loglik_exact, loglik_gradient_exact, PartitionValue, RbmGradient, MAX_ENUM_BINARY_TOTAL,
    MAX_ENUM_HIDDEN,
};
pub use normalize::{GaussianNormalizer, WhiteningKind, DEFAULT_FLOOR};
pub use params::{EnergyValue, RbmParams, VisibleKind};
pub use sampling::{gibbs_chain, ChainOutput, GibbsSampler};
pub use train::{initial_params, train_cd, CdTrainer, TrainConfig};

#[derive(Debug, thiserror::Error)]
pub enum RbmError {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("operation requires {expected:?} visible units")]
    WrongKind { expected: VisibleKind },
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
    #[error("model too large for exact enumeration ({visible} visible, {hidden} hidden)")]
    TooLarge { visible: usize, hidden: usize },
    #[error("no training data")]
    EmptyData,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("training diverged at update {update}: {detail}")]
    Diverged { update: usize, detail: String },
}

impl RbmError {
    pub(crate) fn dims(what: &'static str, expected: usize, got: usize) -> Self {
        RbmError::DimensionMismatch {
            what,
            expected,
            got,
        }
    }
}
