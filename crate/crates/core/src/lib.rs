//! DeepActs: multi-modal skeleton action stamps and the two-branch
//! DeepActsNet (per-modality CNN branches plus masked graph-convolution
//! branches, fused by logit summation).

pub mod cli;
pub mod engine;
mod error;
pub mod graph;
pub mod harness;
pub mod modality;
pub mod model;
pub mod skeleton;
pub mod stamp;

pub use error::Error;
pub use modality::Modality;
