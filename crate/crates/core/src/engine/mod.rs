//! Dense 64-bit tensors, a reverse-mode tape, convolution and graph kernels,
//! and the momentum SGD optimizer.

mod checkpoint;
mod gemm;
pub mod gradcheck;
mod init;
pub mod ops;
mod optim;
mod tape;
mod tensor;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use gemm::gemm;
pub use init::{fan_in_uniform, ParamRng};
pub use optim::{sgd_step, OptimState, Param};
pub use tape::{Gradients, Tape, Var};
pub use tensor::{argmax, Tensor};

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("shape: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("state: {0}")]
    State(String),
    #[error("non-finite gradient for parameter `{name}`")]
    Training { name: String },
    #[error("checkpoint format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
