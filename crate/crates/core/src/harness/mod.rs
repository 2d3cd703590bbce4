//! Synthetic task generation, dataset splits, evaluation reports and the
//! Table-2-style ablation driver.

mod ablation;
mod dataset;
mod eval;
mod synth;

pub use ablation::{
    ablation_csv, run_ablation, summarize_ablation, AblationConfig, AblationResult, AblationRow, AblationSummary,
    ABLATION_ROWS,
};
pub use dataset::{encode_samples, read_dataset, split_dataset, write_dataset, Dataset, SplitMode, MANIFEST_NAME};
pub use eval::{evaluate, EvalReport};
pub use synth::{
    generate_sequence, generate_synthetic, ClassProgram, Motion, MotionPart, SyntheticTaskSpec, Waveform, CENTER_PX,
    FOCAL_PX,
};

use crate::model::ModelError;
use crate::skeleton::SkeletonError;
use crate::stamp::StampError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Stamp(#[from] StampError),
    #[error(transparent)]
    Skeleton(#[from] SkeletonError),
}

/// Runs `f` on a dedicated pool when `threads > 1`, inline otherwise.
pub(crate) fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, HarnessError> {
    if threads <= 1 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Argument(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
