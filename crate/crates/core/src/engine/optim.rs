use super::{EngineError, Tensor};

/// Named trainable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    /// Participates in weight decay. Masks and biases do not.
    pub decay: bool,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Tensor, decay: bool) -> Self {
        Param {
            name: name.into(),
            value,
            decay,
        }
    }
}

/// Momentum SGD state with milestone learning-rate decay.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub velocities: Vec<Tensor>,
    pub momentum: f64,
    pub weight_decay: f64,
    pub base_lr: f64,
    pub decay_factor: f64,
    /// Epochs at which the rate is multiplied by `decay_factor`; sorted.
    pub decay_milestones: Vec<usize>,
}

impl OptimState {
    pub const MOMENTUM: f64 = 0.9;
    pub const WEIGHT_DECAY: f64 = 0.0005;
    pub const BASE_LR: f64 = 1e-4;
    pub const DECAY_FACTOR: f64 = 0.1;

    pub fn new(params: &[Param]) -> Self {
        OptimState {
            velocities: params.iter().map(|p| Tensor::zeros(p.value.shape())).collect(),
            momentum: Self::MOMENTUM,
            weight_decay: Self::WEIGHT_DECAY,
            base_lr: Self::BASE_LR,
            decay_factor: Self::DECAY_FACTOR,
            decay_milestones: Vec::new(),
        }
    }

    /// Milestones at 50% and 75% of `epochs`.
    pub fn default_milestones(epochs: usize) -> Vec<usize> {
        let mut m: Vec<usize> = [epochs / 2, epochs * 3 / 4].into_iter().filter(|&e| e > 0).collect();
        m.dedup();
        m
    }

    pub fn with_lr(mut self, lr: f64) -> Self {
        self.base_lr = lr;
        self
    }

    pub fn with_milestones(mut self, mut milestones: Vec<usize>) -> Self {
        milestones.sort_unstable();
        self.decay_milestones = milestones;
        self
    }

    /// Rate in force during `epoch` (0-based): one decay per milestone `m <= epoch`.
    pub fn lr(&self, epoch: usize) -> f64 {
        let passed = self.decay_milestones.iter().filter(|&&m| m <= epoch).count();
        self.base_lr * self.decay_factor.powi(passed as i32)
    }

    pub fn validate(&self, params: &[Param]) -> Result<(), EngineError> {
        if !(self.base_lr >= 0.0 && self.base_lr.is_finite()) {
            return Err(EngineError::Argument(format!("learning rate must be finite and >= 0, got {}", self.base_lr)));
        }
        if self.velocities.len() != params.len() {
            return Err(EngineError::Shape(format!(
                "optimizer holds {} velocities for {} parameters",
                self.velocities.len(),
                params.len()
            )));
        }
        for (v, p) in self.velocities.iter().zip(params) {
            if v.shape() != p.value.shape() {
                return Err(EngineError::Shape(format!(
                    "velocity for `{}` has shape {:?}, parameter has {:?}",
                    p.name,
                    v.shape(),
                    p.value.shape()
                )));
            }
        }
        Ok(())
    }
}

/// One momentum step. Aborts before touching any state if a gradient is non-finite.
pub fn sgd_step(params: &mut [Param], grads: &[Tensor], state: &mut OptimState, epoch: usize) -> Result<(), EngineError> {
    state.validate(params)?;
    if grads.len() != params.len() {
        return Err(EngineError::Shape(format!("{} gradients for {} parameters", grads.len(), params.len())));
    }
    for (p, g) in params.iter().zip(grads) {
        if g.shape() != p.value.shape() {
            return Err(EngineError::Shape(format!(
                "gradient for `{}` has shape {:?}, parameter has {:?}",
                p.name,
                g.shape(),
                p.value.shape()
            )));
        }
        if !g.is_finite() {
            return Err(EngineError::Training { name: p.name.clone() });
        }
    }
    let lr = state.lr(epoch);
    let mu = state.momentum;
    for ((p, g), v) in params.iter_mut().zip(grads).zip(state.velocities.iter_mut()) {
        let wd = if p.decay { state.weight_decay } else { 0.0 };
        let pv = p.value.data_mut();
        for ((pi, gi), vi) in pv.iter_mut().zip(g.data()).zip(v.data_mut()) {
            let gd = gi + wd * *pi;
            *vi = mu * *vi + gd;
            *pi -= lr * *vi;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_param(v: f64) -> Vec<Param> {
        vec![Param::new("p", Tensor::scalar(v), true)]
    }

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let mut params = vec![Param::new("w", Tensor::vector(vec![0.3, -1.2, 4.0]), true)];
        let before = params.clone();
        let mut st = OptimState::new(&params);
        st.weight_decay = 0.0;
        for e in 0..3 {
            sgd_step(&mut params, &[Tensor::zeros(&[3])], &mut st, e).unwrap();
        }
        assert_eq!(params, before);
    }

    #[test]
    fn hand_evaluated_single_step() {
        let mut params = scalar_param(1.0);
        let mut st = OptimState::new(&params);
        st.weight_decay = 0.0;
        sgd_step(&mut params, &[Tensor::scalar(1.0)], &mut st, 0).unwrap();
        assert_eq!(st.velocities[0].item(), 1.0);
        assert_eq!(params[0].value.item(), 1.0 - 1e-4);
        assert_eq!(params[0].value.item(), 0.9999);
    }

    #[test]
    fn post_milestone_step_is_a_tenth() {
        let run = |epoch: usize| {
            let mut params = scalar_param(0.0);
            let mut st = OptimState::new(&params).with_milestones(vec![5]);
            st.weight_decay = 0.0;
            sgd_step(&mut params, &[Tensor::scalar(1.0)], &mut st, epoch).unwrap();
            -params[0].value.item()
        };
        let (pre, post) = (run(4), run(5));
        assert_eq!(pre, 1e-4);
        assert_eq!(post, pre * 0.1);
    }

    #[test]
    fn lr_schedule_counts_milestones() {
        let st = OptimState::new(&[]).with_lr(1.0).with_milestones(OptimState::default_milestones(30));
        assert_eq!(st.decay_milestones, vec![15, 22]);
        assert_eq!(st.lr(14), 1.0);
        assert_eq!(st.lr(15), 0.1);
        assert_eq!(st.lr(22), 1.0 * 0.1 * 0.1);
    }

    #[test]
    fn weight_decay_skips_masks_and_biases() {
        let mut params = vec![Param::new("w", Tensor::scalar(2.0), true), Param::new("mask", Tensor::scalar(2.0), false)];
        let mut st = OptimState::new(&params).with_lr(1.0);
        sgd_step(&mut params, &[Tensor::scalar(0.0), Tensor::scalar(0.0)], &mut st, 0).unwrap();
        assert_eq!(params[0].value.item(), 2.0 - 0.001);
        assert_eq!(params[1].value.item(), 2.0);
    }

    #[test]
    fn non_finite_gradient_names_the_parameter_and_changes_nothing() {
        let mut params = vec![Param::new("ok", Tensor::scalar(1.0), true), Param::new("graph.w0", Tensor::scalar(1.0), true)];
        let before = params.clone();
        let mut st = OptimState::new(&params);
        let err = sgd_step(&mut params, &[Tensor::scalar(1.0), Tensor::scalar(f64::NAN)], &mut st, 0).unwrap_err();
        assert!(matches!(&err, EngineError::Training { name } if name == "graph.w0"));
        assert_eq!(params, before);
        assert_eq!(st.velocities[0].item(), 0.0);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut params = scalar_param(1.0);
        let mut st = OptimState::new(&params);
        assert!(sgd_step(&mut params, &[Tensor::zeros(&[2])], &mut st, 0).is_err());
    }
}
