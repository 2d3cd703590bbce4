//! DeepActsNet assembly: per-modality CNN and graph branches, summation
//! fusion, the Multi-CNN ensemble, and the training loop.

mod net;
mod spec;
mod train;

pub use net::{
    branch_partitions, cnn_forward, fuse, graph_forward, standardized, Branch, BranchBody, BranchId, BranchKind, ConvStageParams,
    ConvStageVars, GraphLayerParams, GraphLayerVars, Logits, Model, Prediction, Sample,
};
pub use spec::{parse_branches, ConvStage, GraphLayer, ModelSpec, TrainConfig};
pub use train::{epoch_order, evaluate_loss, fit, optimizer_for, train_epoch, EpochMetrics};

use crate::engine::EngineError;
use crate::graph::GraphError;
use crate::modality::Modality;
use crate::skeleton::SkeletonError;
use crate::stamp::StampError;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("config: {0}")]
    Config(String),
    #[error("shape: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("sample has no input for enabled modality `{0}`")]
    MissingModality(Modality),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Stamp(#[from] StampError),
    #[error(transparent)]
    Skeleton(#[from] SkeletonError),
}

impl ModelSpec {
    /// Closed-form parameter count of the branches `self` enables.
    pub fn analytic_param_count(&self) -> usize {
        let k = self.num_classes;
        let cnn = |stack: &[ConvStage]| {
            let mut c_in = 3;
            let mut n = 0;
            for s in stack {
                n += s.out_channels * c_in * s.kernel * s.kernel + s.out_channels;
                c_in = s.out_channels;
            }
            n + k * c_in + k
        };
        let graph = |nodes: usize| {
            let kv = self.partition.partition_count();
            let mut c_in = 3;
            let mut n = 0;
            for l in &self.graph_stack {
                let c = l.out_channels;
                n += kv * c * c_in + kv * nodes * nodes + c * c * l.temporal_kernel + c;
                c_in = c;
            }
            n + k * c_in + k
        };
        let mut total = 0;
        for &m in &self.modalities {
            if self.cnn_on {
                total += cnn(&self.cnn_stack);
                if self.ensemble_cnn_variants == 2 {
                    total += cnn(&self.cnn_stack2);
                }
            }
            if self.graph_on && (m != Modality::Bones || self.bones_graph) {
                total += graph(m.joint_count());
            }
        }
        total
    }
}
