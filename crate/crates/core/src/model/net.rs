use std::fmt;
use std::sync::Arc;

use crate::engine::{argmax, fan_in_uniform, ops, Param, ParamRng, Tape, Tensor, Var};
use crate::graph::{
    adjacency, modality_partitions, partitioned_adjacency, PartitionStrategy, PartitionedAdjacency, Topology,
};
use crate::modality::Modality;
use crate::skeleton::{resample_temporal, SkeletonSequence};
use crate::stamp::{encode_maps, resize_bilinear, EncodeConfig, NormScope, CHANNELS};

use super::{ModelError, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BranchKind {
    Cnn,
    /// Second CNN architecture of the Multi-CNN ensemble.
    Cnn2,
    Graph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BranchId {
    pub kind: BranchKind,
    pub modality: Modality,
}

impl fmt::Display for BranchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            BranchKind::Cnn => "cnn",
            BranchKind::Cnn2 => "cnn2",
            BranchKind::Graph => "graph",
        };
        write!(f, "{k}.{}", self.modality)
    }
}

/// Parameter indices of one convolutional stage.
#[derive(Debug, Clone, Copy)]
pub struct ConvStageParams {
    pub kernel: usize,
    pub bias: usize,
    pub stride: usize,
    pub padding: usize,
}

/// Parameter indices of one graph layer.
#[derive(Debug, Clone, Copy)]
pub struct GraphLayerParams {
    pub weights: usize,
    pub masks: usize,
    pub tkernel: usize,
    pub tbias: usize,
    pub stride: usize,
    pub padding: usize,
}

#[derive(Debug, Clone)]
pub enum BranchBody {
    Cnn(Vec<ConvStageParams>),
    Graph {
        /// K×N×N normalized partition stack.
        partitions: Arc<Tensor>,
        layers: Vec<GraphLayerParams>,
    },
}

#[derive(Debug, Clone)]
pub struct Branch {
    pub id: BranchId,
    pub body: BranchBody,
    pub head_weight: usize,
    pub head_bias: usize,
    /// Range of this branch's entries in [`Model::params`].
    pub params: std::ops::Range<usize>,
}

/// Per-branch logits plus their fused sum.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits {
    pub branches: Vec<(BranchId, Vec<f64>)>,
    pub fused: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub distribution: Vec<f64>,
    pub class: usize,
    pub logits: Logits,
}

/// Network inputs of one sequence, indexed by [`Modality::code`].
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub label: usize,
    /// Resized stamps, `3×S×S`, each channel standardized.
    pub cnn: [Option<Arc<Tensor>>; 5],
    /// Unresized maps, `3×T×N`, each channel standardized.
    pub graph: [Option<Arc<Tensor>>; 5],
}

impl Sample {
    pub fn empty(label: usize) -> Self {
        Sample {
            label,
            cnn: Default::default(),
            graph: Default::default(),
        }
    }

    /// Encodes all five modalities of `seq`, resampling to `spec.frames` first.
    pub fn from_sequence(seq: &SkeletonSequence, label: usize, spec: &ModelSpec) -> Result<Self, ModelError> {
        let seq = if seq.len() == spec.frames {
            seq.clone()
        } else {
            resample_temporal(seq, spec.frames)?
        };
        let cfg = EncodeConfig {
            frames: spec.frames,
            stamp_size: spec.stamp_size,
            scope: NormScope::PerSequence,
        };
        let maps = encode_maps(&seq, &cfg)?;
        let mut s = Sample::empty(label);
        for m in Modality::ALL {
            let map = maps.get(m);
            let ctn = Tensor::new(vec![CHANNELS, spec.frames, m.joint_count()], standardized(map.scaled_ctn()))?;
            let resized = resize_bilinear(map, spec.stamp_size, spec.stamp_size)?;
            let img = Tensor::new(vec![CHANNELS, spec.stamp_size, spec.stamp_size], standardized(resized.scaled()))?;
            s.graph[m.code() as usize] = Some(Arc::new(ctn));
            s.cnn[m.code() as usize] = Some(Arc::new(img));
        }
        Ok(s)
    }

    pub fn cnn_input(&self, m: Modality) -> Option<&Arc<Tensor>> {
        self.cnn[m.code() as usize].as_ref()
    }

    pub fn graph_input(&self, m: Modality) -> Option<&Arc<Tensor>> {
        self.graph[m.code() as usize].as_ref()
    }
}

/// Per-channel zero mean and unit variance of a `3×…` grid; constant channels become zero.
pub fn standardized(mut values: Vec<f64>) -> Vec<f64> {
    let per = values.len() / CHANNELS;
    for ch in values.chunks_mut(per) {
        let mean = ch.iter().sum::<f64>() / per as f64;
        let var = ch.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / per as f64;
        let inv = if var > 1e-24 { 1.0 / var.sqrt() } else { 0.0 };
        ch.iter_mut().for_each(|v| *v = (*v - mean) * inv);
    }
    values
}

/// Seed of a branch's initializer; independent of which other branches exist.
fn branch_seed(init_seed: u64, id: BranchId) -> u64 {
    use sha2::{Digest, Sha256};
    let d = Sha256::digest(format!("{init_seed}:{id}").as_bytes());
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

const RELU_GAIN: f64 = 2.449_489_742_783_178; // sqrt(6)

/// Graph over which a modality's graph branch propagates.
pub fn branch_partitions(modality: Modality, strategy: PartitionStrategy) -> Result<PartitionedAdjacency, ModelError> {
    Ok(match modality {
        Modality::Bones => {
            let top = Topology::bones_line_graph();
            partitioned_adjacency(&adjacency(&top), strategy, top.root)?
        }
        m => modality_partitions(m, strategy)?,
    })
}

fn stack_tensor(p: &PartitionedAdjacency) -> Tensor {
    let n = p.node_count();
    let data = p.stack.iter().flat_map(|a| a.data.iter().copied()).collect();
    Tensor::new(vec![p.partition_count(), n, n], data).expect("partition stack is non-empty")
}

/// DeepActsNet: one CNN (and optionally a second CNN) and one graph branch
/// per enabled modality, fused by summing logits.
#[derive(Debug, Clone)]
pub struct Model {
    pub spec: ModelSpec,
    pub params: Vec<Param>,
    pub branches: Vec<Branch>,
}

impl Model {
    pub fn new(spec: &ModelSpec) -> Result<Self, ModelError> {
        spec.validate()?;
        let mut model = Model {
            spec: spec.clone(),
            params: Vec::new(),
            branches: Vec::new(),
        };
        for &m in &spec.modalities {
            if spec.cnn_on {
                model.add_cnn(BranchId { kind: BranchKind::Cnn, modality: m })?;
                if spec.ensemble_cnn_variants == 2 {
                    model.add_cnn(BranchId { kind: BranchKind::Cnn2, modality: m })?;
                }
            }
            if spec.graph_on && (m != Modality::Bones || spec.bones_graph) {
                model.add_graph(BranchId { kind: BranchKind::Graph, modality: m })?;
            }
        }
        Ok(model)
    }

    fn push(&mut self, name: String, value: Tensor, decay: bool) -> usize {
        self.params.push(Param::new(name, value, decay));
        self.params.len() - 1
    }

    fn add_head(&mut self, id: BranchId, rng: &mut ParamRng, features: usize) -> (usize, usize) {
        let k = self.spec.num_classes;
        let w = fan_in_uniform(rng, &[k, features], features, 1.0);
        (
            self.push(format!("{id}.head.weight"), w, true),
            self.push(format!("{id}.head.bias"), Tensor::zeros(&[k]), false),
        )
    }

    fn add_cnn(&mut self, id: BranchId) -> Result<(), ModelError> {
        let start = self.params.len();
        let mut rng = ParamRng::new(branch_seed(self.spec.init_seed, id));
        let stack = if id.kind == BranchKind::Cnn2 {
            self.spec.cnn_stack2.clone()
        } else {
            self.spec.cnn_stack.clone()
        };
        let mut c_in = CHANNELS;
        let mut stages = Vec::new();
        for (i, st) in stack.iter().enumerate() {
            let fan_in = c_in * st.kernel * st.kernel;
            let k = fan_in_uniform(&mut rng, &[st.out_channels, c_in, st.kernel, st.kernel], fan_in, RELU_GAIN);
            stages.push(ConvStageParams {
                kernel: self.push(format!("{id}.conv{i}.kernel"), k, true),
                bias: self.push(format!("{id}.conv{i}.bias"), Tensor::zeros(&[st.out_channels]), false),
                stride: st.stride,
                padding: st.kernel / 2,
            });
            c_in = st.out_channels;
        }
        let (head_weight, head_bias) = self.add_head(id, &mut rng, c_in);
        self.branches.push(Branch {
            id,
            body: BranchBody::Cnn(stages),
            head_weight,
            head_bias,
            params: start..self.params.len(),
        });
        Ok(())
    }

    fn add_graph(&mut self, id: BranchId) -> Result<(), ModelError> {
        let start = self.params.len();
        let mut rng = ParamRng::new(branch_seed(self.spec.init_seed, id));
        let parts = branch_partitions(id.modality, self.spec.partition)?;
        let (kv, n) = (parts.partition_count(), parts.node_count());
        let mut c_in = CHANNELS;
        let mut layers = Vec::new();
        for (i, l) in self.spec.graph_stack.clone().iter().enumerate() {
            let c = l.out_channels;
            let w = fan_in_uniform(&mut rng, &[kv, c, c_in], kv * c_in, RELU_GAIN);
            let tk = fan_in_uniform(&mut rng, &[c, c, l.temporal_kernel], c * l.temporal_kernel, RELU_GAIN);
            layers.push(GraphLayerParams {
                weights: self.push(format!("{id}.gc{i}.weights"), w, true),
                masks: self.push(format!("{id}.gc{i}.masks"), Tensor::full(&[kv, n, n], 1.0), false),
                tkernel: self.push(format!("{id}.tc{i}.kernel"), tk, true),
                tbias: self.push(format!("{id}.tc{i}.bias"), Tensor::zeros(&[c]), false),
                stride: l.temporal_stride,
                padding: l.temporal_kernel / 2,
            });
            c_in = c;
        }
        let (head_weight, head_bias) = self.add_head(id, &mut rng, c_in);
        self.branches.push(Branch {
            id,
            body: BranchBody::Graph {
                partitions: Arc::new(stack_tensor(&parts)),
                layers,
            },
            head_weight,
            head_bias,
            params: start..self.params.len(),
        });
        Ok(())
    }

    pub fn branch(&self, id: BranchId) -> Option<&Branch> {
        self.branches.iter().find(|b| b.id == id)
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn branch_param_count(&self, id: BranchId) -> usize {
        self.branch(id)
            .map(|b| self.params[b.params.clone()].iter().map(|p| p.value.len()).sum())
            .unwrap_or(0)
    }

    /// Parameter values behind shared buffers, for recording many tapes.
    pub fn snapshot(&self) -> Vec<Arc<Tensor>> {
        self.params.iter().map(|p| Arc::new(p.value.clone())).collect()
    }

    /// Records every branch on `tape`; `vars[i]` is the leaf of parameter `i`.
    /// Returns per-branch logits and their fused sum.
    pub fn forward(&self, tape: &mut Tape, vars: &[Var], sample: &Sample) -> Result<(Vec<(BranchId, Var)>, Var), ModelError> {
        let mut outs = Vec::with_capacity(self.branches.len());
        for b in &self.branches {
            let logits = match &b.body {
                BranchBody::Cnn(stages) => {
                    let x = sample.cnn_input(b.id.modality).ok_or(ModelError::MissingModality(b.id.modality))?;
                    let s = self.spec.stamp_size;
                    if x.shape() != [CHANNELS, s, s] {
                        return Err(ModelError::Shape(format!(
                            "{}: stamp is {:?}, spec expects [3, {s}, {s}]",
                            b.id,
                            x.shape()
                        )));
                    }
                    let xv = tape.constant_shared(x.clone());
                    let stage_vars: Vec<ConvStageVars> = stages
                        .iter()
                        .map(|st| ConvStageVars {
                            kernel: vars[st.kernel],
                            bias: vars[st.bias],
                            stride: st.stride,
                            padding: st.padding,
                        })
                        .collect();
                    cnn_forward(tape, xv, &stage_vars, vars[b.head_weight], vars[b.head_bias])?
                }
                BranchBody::Graph { partitions, layers } => {
                    let x = sample.graph_input(b.id.modality).ok_or(ModelError::MissingModality(b.id.modality))?;
                    let n = partitions.shape()[1];
                    if x.shape() != [CHANNELS, self.spec.frames, n] {
                        return Err(ModelError::Shape(format!(
                            "{}: input is {:?}, expected [3, {}, {n}]",
                            b.id,
                            x.shape(),
                            self.spec.frames
                        )));
                    }
                    let xv = tape.constant_shared(x.clone());
                    let av = tape.constant_shared(partitions.clone());
                    let layer_vars: Vec<GraphLayerVars> = layers
                        .iter()
                        .map(|l| GraphLayerVars {
                            weights: vars[l.weights],
                            masks: vars[l.masks],
                            tkernel: vars[l.tkernel],
                            tbias: vars[l.tbias],
                            stride: l.stride,
                            padding: l.padding,
                        })
                        .collect();
                    graph_forward(tape, xv, av, &layer_vars, vars[b.head_weight], vars[b.head_bias])?
                }
            };
            outs.push((b.id, logits));
        }
        let fused = tape.add_all(&outs.iter().map(|(_, v)| *v).collect::<Vec<_>>())?;
        Ok((outs, fused))
    }

    /// Fused class distribution and per-branch logits of one sample.
    pub fn predict(&self, sample: &Sample) -> Result<Prediction, ModelError> {
        self.predict_with(&self.snapshot(), sample)
    }

    /// [`Model::predict`] over a prepared [`Model::snapshot`].
    pub fn predict_with(&self, shared: &[Arc<Tensor>], sample: &Sample) -> Result<Prediction, ModelError> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = shared.iter().map(|t| tape.constant_shared(t.clone())).collect();
        let (outs, fused) = self.forward(&mut tape, &vars, sample)?;
        let logits = Logits {
            branches: outs.iter().map(|(id, v)| (*id, tape.value(*v).data().to_vec())).collect(),
            fused: tape.value(fused).data().to_vec(),
        };
        let distribution = ops::softmax(&logits.fused);
        Ok(Prediction {
            class: argmax(&logits.fused),
            distribution,
            logits,
        })
    }
}

/// Elementwise sum of branch logits, summed left to right.
pub fn fuse(branch_logits: &[Vec<f64>]) -> Result<Vec<f64>, ModelError> {
    let (first, rest) = branch_logits
        .split_first()
        .ok_or_else(|| ModelError::Argument("fuse needs at least one branch".into()))?;
    let mut acc = first.clone();
    for v in rest {
        if v.len() != acc.len() {
            return Err(ModelError::Shape(format!("branch logits of length {} and {}", acc.len(), v.len())));
        }
        for (a, b) in acc.iter_mut().zip(v) {
            *a += b;
        }
    }
    Ok(acc)
}

pub struct ConvStageVars {
    pub kernel: Var,
    pub bias: Var,
    pub stride: usize,
    pub padding: usize,
}

pub struct GraphLayerVars {
    pub weights: Var,
    pub masks: Var,
    pub tkernel: Var,
    pub tbias: Var,
    pub stride: usize,
    pub padding: usize,
}

/// conv → relu per stage, global average pool, linear head.
pub fn cnn_forward(tape: &mut Tape, input: Var, stages: &[ConvStageVars], head_w: Var, head_b: Var) -> Result<Var, ModelError> {
    let mut x = input;
    for st in stages {
        let y = tape.conv2d(x, st.kernel, Some(st.bias), st.stride, st.padding)?;
        x = tape.relu(y);
    }
    let pooled = tape.global_avg_pool(x);
    Ok(tape.linear(pooled, head_w, Some(head_b))?)
}

/// graph conv → relu → temporal conv → relu per layer, global average pool, linear head.
pub fn graph_forward(
    tape: &mut Tape,
    input: Var,
    partitions: Var,
    layers: &[GraphLayerVars],
    head_w: Var,
    head_b: Var,
) -> Result<Var, ModelError> {
    let mut x = input;
    for l in layers {
        let g = tape.graph_conv(x, partitions, l.weights, l.masks)?;
        let g = tape.relu(g);
        let t = tape.temporal_conv(g, l.tkernel, Some(l.tbias), l.stride, l.padding)?;
        x = tape.relu(t);
    }
    let pooled = tape.global_avg_pool(x);
    Ok(tape.linear(pooled, head_w, Some(head_b))?)
}
