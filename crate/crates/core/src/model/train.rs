use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::engine::{argmax, sgd_step, OptimState, Tape, Tensor, Var};

use super::{Model, ModelError, Sample, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lr: f64,
    /// Mean per-sample loss, measured before each batch's update.
    pub mean_loss: f64,
    pub accuracy: f64,
}

struct SampleStep {
    loss: f64,
    correct: bool,
    grads: Vec<Tensor>,
}

fn sample_step(model: &Model, shared: &[Arc<Tensor>], sample: &Sample) -> Result<SampleStep, ModelError> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = shared.iter().map(|t| tape.param_shared(t.clone())).collect();
    let (_, fused) = model.forward(&mut tape, &vars, sample)?;
    let loss = tape.softmax_cross_entropy(fused, sample.label)?;
    let loss_value = tape.value(loss).item();
    let correct = argmax(tape.value(fused).data()) == sample.label;
    let g = tape.backward(loss)?;
    Ok(SampleStep {
        loss: loss_value,
        correct,
        grads: vars.iter().map(|&v| g.get(v)).collect(),
    })
}

/// Optimizer state for `model` under `cfg`.
pub fn optimizer_for(model: &Model, cfg: &TrainConfig) -> OptimState {
    let mut st = OptimState::new(&model.params)
        .with_lr(cfg.lr)
        .with_milestones(cfg.milestones());
    st.momentum = cfg.momentum;
    st.weight_decay = cfg.weight_decay;
    st.decay_factor = cfg.decay_factor;
    st
}

/// Sample order of `epoch`: a permutation seeded by the shuffle seed and the epoch.
pub fn epoch_order(n: usize, shuffle_seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let seed = shuffle_seed ^ (epoch as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

/// One pass over `data` in mini-batches; the batch gradient is the mean of
/// per-sample gradients summed in batch order.
pub fn train_epoch(
    model: &mut Model,
    data: &[Sample],
    optim: &mut OptimState,
    epoch: usize,
    cfg: &TrainConfig,
) -> Result<EpochMetrics, ModelError> {
    if data.is_empty() {
        return Err(ModelError::Argument("training set is empty".into()));
    }
    if cfg.batch_size == 0 {
        return Err(ModelError::Argument("batch size must be positive".into()));
    }
    if let Some(s) = data.iter().find(|s| s.label >= model.spec.num_classes) {
        return Err(ModelError::Argument(format!(
            "label {} out of range for {} classes",
            s.label, model.spec.num_classes
        )));
    }
    let pool = if cfg.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build()
                .map_err(|e| ModelError::Argument(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };
    let order = epoch_order(data.len(), cfg.shuffle_seed, epoch);
    let (mut loss_sum, mut correct) = (0.0, 0usize);
    for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
        let shared = model.snapshot();
        let mut sum: Vec<Tensor> = model.params.iter().map(|p| Tensor::zeros(p.value.shape())).collect();
        let mut batch_loss = 0.0;
        let mut absorb = |step: SampleStep| {
            batch_loss += step.loss;
            correct += step.correct as usize;
            for (acc, g) in sum.iter_mut().zip(&step.grads) {
                for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                    *a += b;
                }
            }
        };
        match &pool {
            Some(pool) => {
                let steps: Vec<Result<SampleStep, ModelError>> =
                    pool.install(|| batch.par_iter().map(|&i| sample_step(model, &shared, &data[i])).collect());
                for s in steps {
                    absorb(s?);
                }
            }
            None => {
                for &i in batch {
                    absorb(sample_step(model, &shared, &data[i])?);
                }
            }
        }
        if !batch_loss.is_finite() {
            return Err(ModelError::NonFiniteLoss { epoch, batch: batch_idx });
        }
        loss_sum += batch_loss;
        drop(shared);
        let inv = 1.0 / batch.len() as f64;
        for g in &mut sum {
            g.data_mut().iter_mut().for_each(|v| *v *= inv);
        }
        sgd_step(&mut model.params, &sum, optim, epoch)?;
    }
    Ok(EpochMetrics {
        epoch,
        lr: optim.lr(epoch),
        mean_loss: loss_sum / data.len() as f64,
        accuracy: correct as f64 / data.len() as f64,
    })
}

/// Trains for `cfg.epochs`, reporting each epoch to `on_epoch`.
pub fn fit(
    model: &mut Model,
    data: &[Sample],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<Vec<EpochMetrics>, ModelError> {
    let mut optim = optimizer_for(model, cfg);
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let m = train_epoch(model, data, &mut optim, epoch, cfg)?;
        on_epoch(&m);
        trace.push(m);
    }
    Ok(trace)
}

/// Mean loss and accuracy of `data` without updating.
pub fn evaluate_loss(model: &Model, data: &[Sample]) -> Result<(f64, f64), ModelError> {
    let shared = model.snapshot();
    let (mut loss, mut correct) = (0.0, 0usize);
    for s in data {
        let p = model.predict_with(&shared, s)?;
        loss += -p.distribution[s.label].ln();
        correct += (p.class == s.label) as usize;
    }
    Ok((loss / data.len() as f64, correct as f64 / data.len() as f64))
}
