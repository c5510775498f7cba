//! AdamW with decoupled weight decay, and a reduce-on-plateau schedule.

use super::head::HeadParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            weight_decay: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment accumulators, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: AdamWConfig,
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(config: AdamWConfig, tensor_sizes: impl IntoIterator<Item = usize>) -> Self {
        let sizes: Vec<usize> = tensor_sizes.into_iter().collect();
        Self {
            config,
            step: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_params(config: AdamWConfig, params: &HeadParams) -> Self {
        Self::new(config, params.tensors().iter().map(|t| t.len()))
    }

    pub fn lr(&self) -> f64 {
        self.config.lr
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.config.lr = lr;
    }

    /// One update over matching lists of parameter and gradient tensors:
    ///
    /// ```text
    /// m = b1 m + (1 - b1) g          v = b2 v + (1 - b2) g^2
    /// p = p - lr wd p - lr m_hat / (sqrt(v_hat) + eps)
    /// ```
    pub fn step_tensors(&mut self, params: Vec<&mut [f64]>, grads: Vec<&[f64]>) {
        assert_eq!(params.len(), self.m.len(), "tensor count mismatch");
        assert_eq!(grads.len(), self.m.len(), "tensor count mismatch");
        self.step += 1;
        let AdamWConfig {
            lr,
            weight_decay,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        let decay = 1.0 - lr * weight_decay;
        for (((p, g), m), v) in params
            .into_iter()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            assert_eq!(p.len(), g.len(), "tensor shape mismatch");
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] = p[i] * decay - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

pub fn adamw_step(state: &mut OptimizerState, params: &mut HeadParams, grads: &HeadParams) {
    state.step_tensors(params.tensors_mut(), grads.tensors());
}

/// Lowers the learning rate after `patience` epochs without relative
/// improvement of a minimized metric.
#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerState {
    pub best: f64,
    pub epochs_since_improvement: usize,
    pub factor: f64,
    pub patience: usize,
    pub threshold: f64,
    pub lr: f64,
}

impl SchedulerState {
    pub fn new(lr: f64, factor: f64, patience: usize, threshold: f64) -> Self {
        assert!(factor > 0.0 && factor < 1.0, "factor must lie in (0, 1)");
        Self {
            best: f64::INFINITY,
            epochs_since_improvement: 0,
            factor,
            patience,
            threshold,
            lr,
        }
    }

    /// Factor 0.1, patience 10, threshold 1e-4.
    pub fn with_defaults(lr: f64) -> Self {
        Self::new(lr, 0.1, 10, 1e-4)
    }

    fn improves(&self, metric: f64) -> bool {
        // relative threshold measured from |best| so negative losses also work
        if self.best.is_infinite() {
            return metric < self.best;
        }
        metric < self.best - self.best.abs() * self.threshold
    }
}

/// Feeds one epoch metric; returns true when the learning rate was reduced.
pub fn scheduler_step(state: &mut SchedulerState, epoch_metric: f64) -> bool {
    if state.improves(epoch_metric) {
        state.best = epoch_metric;
        state.epochs_since_improvement = 0;
        return false;
    }
    state.epochs_since_improvement += 1;
    if state.epochs_since_improvement > state.patience {
        state.lr *= state.factor;
        state.epochs_since_improvement = 0;
        return true;
    }
    false
}
