//! Operation tape for reverse-mode differentiation.
//!
//! Every op appends one node holding its value and enough saved state for
//! its local gradient rule. [`Tape::backward`] walks the nodes in exact
//! reverse order of recording.

use std::sync::Arc;

use super::ops::{self, ConvGeometry, GraphConvCache, GraphConvDims};
use super::{EngineError, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op {
    Leaf,
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sum(Var),
    Dot(Var, Var),
    Relu(Var),
    Conv {
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        geom: ConvGeometry,
        cols: Vec<f64>,
    },
    GraphConv {
        input: Var,
        partitions: Var,
        weights: Var,
        masks: Var,
        dims: GraphConvDims,
        cache: GraphConvCache,
    },
    GlobalAvgPool(Var),
    Linear {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    Softmax(Var),
    CrossEntropy {
        dist: Var,
        label: usize,
    },
    SoftmaxCrossEntropy {
        logits: Var,
        label: usize,
        probs: Vec<f64>,
    },
}

struct Node {
    value: Arc<Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Records a forward computation; single use for [`Tape::backward`].
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Gradients from one backward pass, indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient of the loss w.r.t. `v`; zeros when the loss does not depend on `v`.
    pub fn get(&self, v: Var) -> Tensor {
        let shape = self.shapes[v.0].clone();
        match &self.grads[v.0] {
            Some(g) => Tensor::new(shape, g.clone()).expect("gradient shape matches value"),
            None => Tensor::zeros(&shape),
        }
    }

    pub fn reached(&self, v: Var) -> bool {
        self.grads[v.0].is_some()
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, g: &[f64]) {
    match slot {
        Some(acc) => {
            for (a, b) in acc.iter_mut().zip(g) {
                *a += b;
            }
        }
        None => *slot = Some(g.to_vec()),
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value: Arc::new(value),
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Differentiable leaf (parameter or input under test).
    pub fn param(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Differentiable leaf sharing an existing buffer.
    pub fn param_shared(&mut self, t: Arc<Tensor>) -> Var {
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
            requires_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// Constant leaf sharing an existing buffer.
    pub fn constant_shared(&mut self, t: Arc<Tensor>) -> Var {
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<(), EngineError> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(EngineError::Shape(format!("{what}: operand shapes {sa:?} and {sb:?} differ")));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, EngineError> {
        self.same_shape(a, b, "add")?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| x + y).collect();
        let t = Tensor::new(self.value(a).shape().to_vec(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(t, Op::Add(a, b), rg))
    }

    /// Left-to-right sum of several same-shaped values.
    pub fn add_all(&mut self, vars: &[Var]) -> Result<Var, EngineError> {
        let (&first, rest) = vars
            .split_first()
            .ok_or_else(|| EngineError::Argument("add_all of an empty list".into()))?;
        let mut acc = first;
        for &v in rest {
            acc = self.add(acc, v)?;
        }
        Ok(acc)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, EngineError> {
        self.same_shape(a, b, "mul")?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| x * y).collect();
        let t = Tensor::new(self.value(a).shape().to_vec(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(t, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a);
        let t = Tensor::new(v.shape().to_vec(), v.data().iter().map(|x| x * s).collect()).unwrap();
        let rg = self.rg(a);
        self.push(t, Op::Scale(a, s), rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s: f64 = self.value(a).data().iter().sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var, EngineError> {
        self.same_shape(a, b, "dot")?;
        let s: f64 = self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| x * y).sum();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::scalar(s), Op::Dot(a, b), rg))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let t = Tensor::new(v.shape().to_vec(), v.data().iter().map(|x| x.max(0.0)).collect()).unwrap();
        let rg = self.rg(a);
        self.push(t, Op::Relu(a), rg)
    }

    /// Cross-correlation of a `c_in×h×w` input with `c_out×c_in×k×k` kernels.
    pub fn conv2d(&mut self, input: Var, kernel: Var, bias: Option<Var>, stride: usize, padding: usize) -> Result<Var, EngineError> {
        let (xs, ks) = (self.value(input).shape(), self.value(kernel).shape());
        if xs.len() != 3 {
            return Err(EngineError::Shape(format!("conv2d input: expected rank 3 (C×H×W), got {xs:?}")));
        }
        if ks.len() != 4 || ks[1] != xs[0] || ks[2] != ks[3] {
            return Err(EngineError::Shape(format!(
                "conv2d kernel: expected {{C_out}}×{}×k×k, got {ks:?}",
                xs[0]
            )));
        }
        let geom = ConvGeometry::square(xs[0], xs[1], xs[2], ks[0], ks[2], stride, padding);
        self.conv(input, kernel, bias, geom, "conv2d")
    }

    /// 1D convolution along T of a `c_in×T×N` input with `c_out×c_in×k_t` kernels,
    /// shared across nodes.
    pub fn temporal_conv(&mut self, input: Var, kernel: Var, bias: Option<Var>, stride: usize, padding: usize) -> Result<Var, EngineError> {
        let (xs, ks) = (self.value(input).shape(), self.value(kernel).shape());
        if xs.len() != 3 {
            return Err(EngineError::Shape(format!("temporal_conv input: expected rank 3 (C×T×N), got {xs:?}")));
        }
        if ks.len() != 3 || ks[1] != xs[0] {
            return Err(EngineError::Shape(format!(
                "temporal_conv kernel: expected {{C_out}}×{}×k_t, got {ks:?}",
                xs[0]
            )));
        }
        let geom = ConvGeometry::temporal(xs[0], xs[1], xs[2], ks[0], ks[2], stride, padding);
        self.conv(input, kernel, bias, geom, "temporal_conv")
    }

    fn conv(&mut self, input: Var, kernel: Var, bias: Option<Var>, geom: ConvGeometry, what: &str) -> Result<Var, EngineError> {
        geom.validate()?;
        if let Some(b) = bias {
            if self.value(b).shape() != [geom.c_out] {
                return Err(EngineError::Shape(format!(
                    "{what} bias: expected [{}], got {:?}",
                    geom.c_out,
                    self.value(b).shape()
                )));
            }
        }
        let (out, cols) = ops::conv_forward(
            self.value(input).data(),
            self.value(kernel).data(),
            bias.map(|b| self.value(b).data()),
            &geom,
        );
        let t = Tensor::new(vec![geom.c_out, geom.out_h(), geom.out_w()], out)?;
        let rg = self.rg(input) || self.rg(kernel) || bias.is_some_and(|b| self.rg(b));
        Ok(self.push(
            t,
            Op::Conv {
                input,
                kernel,
                bias,
                geom,
                cols,
            },
            rg,
        ))
    }

    /// Masked graph convolution over a `c_in×T×N` input.
    ///
    /// `partitions` and `masks` are `K×N×N`, `weights` is `K×c_out×c_in`.
    pub fn graph_conv(&mut self, input: Var, partitions: Var, weights: Var, masks: Var) -> Result<Var, EngineError> {
        let xs = self.value(input).shape();
        if xs.len() != 3 {
            return Err(EngineError::Shape(format!("graph_conv input: expected rank 3 (C×T×N), got {xs:?}")));
        }
        let (c_in, t, n) = (xs[0], xs[1], xs[2]);
        let ps = self.value(partitions).shape();
        if ps.len() != 3 || ps[1] != n || ps[2] != n {
            return Err(EngineError::Shape(format!("graph_conv partitions: expected K×{n}×{n}, got {ps:?}")));
        }
        let k = ps[0];
        let ws = self.value(weights).shape();
        if ws.len() != 3 || ws[0] != k || ws[2] != c_in {
            return Err(EngineError::Shape(format!(
                "graph_conv weights: expected {k}×C_out×{c_in}, got {ws:?}"
            )));
        }
        let ms = self.value(masks).shape();
        if ms != [k, n, n] {
            return Err(EngineError::Shape(format!("graph_conv masks: expected {k}×{n}×{n}, got {ms:?}")));
        }
        let dims = GraphConvDims {
            c_in,
            t,
            n,
            c_out: ws[1],
            k,
        };
        let (out, cache) = ops::graph_conv_forward(
            self.value(input).data(),
            self.value(partitions).data(),
            self.value(weights).data(),
            self.value(masks).data(),
            &dims,
        );
        let tensor = Tensor::new(vec![dims.c_out, t, n], out)?;
        let rg = self.rg(input) || self.rg(weights) || self.rg(masks) || self.rg(partitions);
        Ok(self.push(
            tensor,
            Op::GraphConv {
                input,
                partitions,
                weights,
                masks,
                dims,
                cache,
            },
            rg,
        ))
    }

    /// Mean over every axis but the first.
    pub fn global_avg_pool(&mut self, input: Var) -> Var {
        let v = self.value(input);
        let c = v.shape()[0];
        let m = v.len() / c;
        let means = v.data().chunks(m).map(|ch| ch.iter().sum::<f64>() / m as f64).collect();
        let rg = self.rg(input);
        self.push(Tensor::vector(means), Op::GlobalAvgPool(input), rg)
    }

    /// y = W x + b for `W: K×D`, `x: D`, `b: K`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var, EngineError> {
        let (xs, ws) = (self.value(x).shape(), self.value(w).shape());
        if xs.len() != 1 || ws.len() != 2 || ws[1] != xs[0] {
            return Err(EngineError::Shape(format!("linear: weight {ws:?} incompatible with input {xs:?}")));
        }
        let (k, d) = (ws[0], ws[1]);
        if let Some(b) = b {
            if self.value(b).shape() != [k] {
                return Err(EngineError::Shape(format!("linear bias: expected [{k}], got {:?}", self.value(b).shape())));
            }
        }
        let mut y = match b {
            Some(b) => self.value(b).data().to_vec(),
            None => vec![0.0; k],
        };
        let wd = self.value(w).data();
        let xd = self.value(x).data();
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += wd[i * d..(i + 1) * d].iter().zip(xd).map(|(a, b)| a * b).sum::<f64>();
        }
        let rg = self.rg(x) || self.rg(w) || b.is_some_and(|b| self.rg(b));
        Ok(self.push(Tensor::vector(y), Op::Linear { x, w, b }, rg))
    }

    pub fn softmax(&mut self, logits: Var) -> Result<Var, EngineError> {
        let v = self.value(logits);
        if v.rank() != 1 {
            return Err(EngineError::Shape(format!("softmax: expected a vector, got {:?}", v.shape())));
        }
        let p = ops::softmax(v.data());
        let rg = self.rg(logits);
        Ok(self.push(Tensor::vector(p), Op::Softmax(logits), rg))
    }

    /// −log dist[label] for a probability vector.
    pub fn cross_entropy(&mut self, dist: Var, label: usize) -> Result<Var, EngineError> {
        let v = self.value(dist);
        if label >= v.len() {
            return Err(EngineError::Argument(format!("label {label} out of range for {} classes", v.len())));
        }
        let loss = -v.data()[label].ln();
        let rg = self.rg(dist);
        Ok(self.push(Tensor::scalar(loss), Op::CrossEntropy { dist, label }, rg))
    }

    /// Numerically stable cross-entropy of softmax(logits).
    pub fn softmax_cross_entropy(&mut self, logits: Var, label: usize) -> Result<Var, EngineError> {
        let v = self.value(logits);
        if v.rank() != 1 {
            return Err(EngineError::Shape(format!("softmax_cross_entropy: expected a vector, got {:?}", v.shape())));
        }
        if label >= v.len() {
            return Err(EngineError::Argument(format!("label {label} out of range for {} classes", v.len())));
        }
        let loss = ops::log_sum_exp(v.data()) - v.data()[label];
        let probs = ops::softmax(v.data());
        let rg = self.rg(logits);
        Ok(self.push(Tensor::scalar(loss), Op::SoftmaxCrossEntropy { logits, label, probs }, rg))
    }

    /// Reverse-mode pass from a scalar `loss`. The tape cannot be reused afterwards.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients, EngineError> {
        if self.consumed {
            return Err(EngineError::State("backward already ran on this tape; record a new one".into()));
        }
        if loss.0 >= self.nodes.len() {
            return Err(EngineError::Argument("loss is not on this tape".into()));
        }
        if self.value(loss).len() != 1 {
            return Err(EngineError::Shape(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        self.consumed = true;
        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                grads[i] = Some(g);
                continue;
            }
            let val = |v: Var| -> &Tensor { &self.nodes[v.0].value };
            let rg = |v: Var| self.nodes[v.0].requires_grad;
            match &node.op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    for v in [*a, *b] {
                        if rg(v) {
                            accumulate(&mut grads[v.0], &g);
                        }
                    }
                }
                Op::Mul(a, b) => {
                    if rg(*a) {
                        let ga: Vec<f64> = g.iter().zip(val(*b).data()).map(|(x, y)| x * y).collect();
                        accumulate(&mut grads[a.0], &ga);
                    }
                    if rg(*b) {
                        let gb: Vec<f64> = g.iter().zip(val(*a).data()).map(|(x, y)| x * y).collect();
                        accumulate(&mut grads[b.0], &gb);
                    }
                }
                Op::Scale(a, s) => {
                    let ga: Vec<f64> = g.iter().map(|x| x * s).collect();
                    accumulate(&mut grads[a.0], &ga);
                }
                Op::Sum(a) => {
                    let ga = vec![g[0]; val(*a).len()];
                    accumulate(&mut grads[a.0], &ga);
                }
                Op::Dot(a, b) => {
                    if rg(*a) {
                        let ga: Vec<f64> = val(*b).data().iter().map(|y| g[0] * y).collect();
                        accumulate(&mut grads[a.0], &ga);
                    }
                    if rg(*b) {
                        let gb: Vec<f64> = val(*a).data().iter().map(|x| g[0] * x).collect();
                        accumulate(&mut grads[b.0], &gb);
                    }
                }
                Op::Relu(a) => {
                    let ga: Vec<f64> = g
                        .iter()
                        .zip(val(*a).data())
                        .map(|(gv, x)| if *x > 0.0 { *gv } else { 0.0 })
                        .collect();
                    accumulate(&mut grads[a.0], &ga);
                }
                Op::Conv {
                    input,
                    kernel,
                    bias,
                    geom,
                    cols,
                } => {
                    let cg = ops::conv_backward(&g, cols, val(*kernel).data(), geom, rg(*input));
                    if rg(*input) {
                        accumulate(&mut grads[input.0], &cg.input);
                    }
                    if rg(*kernel) {
                        accumulate(&mut grads[kernel.0], &cg.kernel);
                    }
                    if let Some(b) = bias {
                        if rg(*b) {
                            accumulate(&mut grads[b.0], &cg.bias);
                        }
                    }
                }
                Op::GraphConv {
                    input,
                    partitions,
                    weights,
                    masks,
                    dims,
                    cache,
                } => {
                    let gg = ops::graph_conv_backward(
                        &g,
                        val(*input).data(),
                        val(*partitions).data(),
                        val(*weights).data(),
                        cache,
                        dims,
                    );
                    if rg(*input) {
                        accumulate(&mut grads[input.0], &gg.input);
                    }
                    if rg(*weights) {
                        accumulate(&mut grads[weights.0], &gg.weights);
                    }
                    if rg(*masks) {
                        accumulate(&mut grads[masks.0], &gg.masks);
                    }
                }
                Op::GlobalAvgPool(a) => {
                    let v = val(*a);
                    let m = v.len() / v.shape()[0];
                    let ga: Vec<f64> = g.iter().flat_map(|gc| std::iter::repeat_n(gc / m as f64, m)).collect();
                    accumulate(&mut grads[a.0], &ga);
                }
                Op::Linear { x, w, b } => {
                    let (wv, xv) = (val(*w), val(*x));
                    let d = xv.len();
                    if rg(*x) {
                        let mut gx = vec![0.0; d];
                        for (i, gi) in g.iter().enumerate() {
                            for (gxj, wij) in gx.iter_mut().zip(&wv.data()[i * d..(i + 1) * d]) {
                                *gxj += gi * wij;
                            }
                        }
                        accumulate(&mut grads[x.0], &gx);
                    }
                    if rg(*w) {
                        let gw: Vec<f64> = g.iter().flat_map(|gi| xv.data().iter().map(move |xj| gi * xj)).collect();
                        accumulate(&mut grads[w.0], &gw);
                    }
                    if let Some(b) = b {
                        if rg(*b) {
                            accumulate(&mut grads[b.0], &g);
                        }
                    }
                }
                Op::Softmax(a) => {
                    let p = node.value.data();
                    let gp: f64 = g.iter().zip(p).map(|(x, y)| x * y).sum();
                    let ga: Vec<f64> = g.iter().zip(p).map(|(gi, pi)| pi * (gi - gp)).collect();
                    accumulate(&mut grads[a.0], &ga);
                }
                Op::CrossEntropy { dist, label } => {
                    let mut gd = vec![0.0; val(*dist).len()];
                    gd[*label] = -g[0] / val(*dist).data()[*label];
                    accumulate(&mut grads[dist.0], &gd);
                }
                Op::SoftmaxCrossEntropy { logits, label, probs } => {
                    let mut gl: Vec<f64> = probs.iter().map(|p| g[0] * p).collect();
                    gl[*label] -= g[0];
                    accumulate(&mut grads[logits.0], &gl);
                }
            }
            grads[i] = Some(g);
        }

        // only differentiable leaves keep gradients
        for (i, node) in self.nodes.iter().enumerate() {
            if !(node.requires_grad && matches!(node.op, Op::Leaf)) {
                grads[i] = None;
            }
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }
}
