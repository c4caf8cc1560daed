pub mod bank;
pub mod cli;
pub mod data;
pub mod eval;
pub mod features;
pub mod head;
pub mod math;
pub mod multimodal;
pub mod pipeline;
pub mod rbm;
pub mod types;

pub use types::{Half, Modality};
