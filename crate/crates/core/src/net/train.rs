use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::head::{backward, forward, infer, init_params, HeadConfig, HeadOutputs, HeadParams};
use super::optim::{adamw_step, scheduler_step, AdamWConfig, OptimizerState, SchedulerState};
use super::NetError;
use crate::kitti::{Dims, DimsStats, ObjectLabel};
use crate::losses::{total_loss, LossConfig, ObjectTarget};
use crate::multibin::{decode, encode, BinLayout};

/// Row-major feature matrix with one target per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_dim: usize,
    pub features: Vec<f64>,
    pub targets: Vec<ObjectTarget>,
}

impl Dataset {
    pub fn new(
        feature_dim: usize,
        features: Vec<f64>,
        targets: Vec<ObjectTarget>,
    ) -> Result<Self, NetError> {
        if feature_dim == 0 || features.len() != feature_dim * targets.len() {
            return Err(NetError::Shape(format!(
                "{} feature values for {} targets of width {feature_dim}",
                features.len(),
                targets.len()
            )));
        }
        Ok(Self {
            feature_dim,
            features,
            targets,
        })
    }

    /// Pairs label rows with feature rows, using `alpha` as the local angle.
    /// Rows whose class has no mean in `stats` (including DontCare) are
    /// dropped together with their features.
    pub fn from_labels(
        labels: &[ObjectLabel],
        feature_dim: usize,
        features: &[f64],
        stats: &DimsStats,
        layout: &BinLayout,
    ) -> Result<Self, NetError> {
        if feature_dim == 0 || features.len() != feature_dim * labels.len() {
            return Err(NetError::Shape(format!(
                "{} feature values for {} labels of width {feature_dim}",
                features.len(),
                labels.len()
            )));
        }
        let mut rows = Vec::new();
        let mut targets = Vec::new();
        for (i, l) in labels.iter().enumerate() {
            let Some(mean) = stats.mean(&l.class_name).filter(|_| !l.is_dont_care()) else {
                continue;
            };
            rows.extend_from_slice(&features[i * feature_dim..(i + 1) * feature_dim]);
            targets.push(ObjectTarget {
                bins: encode(l.alpha, layout),
                dims_true: l.dims,
                dims_mean: mean,
            });
        }
        Self::new(feature_dim, rows, targets)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            feature_dim: self.feature_dim,
            features: indices
                .iter()
                .flat_map(|&i| self.row(i).iter().copied())
                .collect(),
            targets: indices.iter().map(|&i| self.targets[i].clone()).collect(),
        }
    }

    /// First `n` rows and the rest.
    pub fn split_at(&self, n: usize) -> (Self, Self) {
        let all: Vec<usize> = (0..self.len()).collect();
        let (a, b) = all.split_at(n.min(self.len()));
        (self.subset(a), self.subset(b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamWConfig,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub plateau_threshold: f64,
    pub seed: u64,
    /// Standard deviation of Gaussian noise added to training features.
    pub feature_noise_sigma: f64,
    /// Workers per batch; gradients are summed in worker order.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 250,
            batch_size: 200,
            optimizer: AdamWConfig::default(),
            plateau_factor: 0.1,
            plateau_patience: 10,
            plateau_threshold: 1e-4,
            seed: 0,
            feature_noise_sigma: 0.0,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    /// Learning rate used during this epoch.
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub params: HeadParams,
    pub history: Vec<EpochStats>,
}

impl TrainReport {
    /// One `epoch mean_loss lr` line per epoch.
    pub fn history_text(&self) -> String {
        self.history
            .iter()
            .map(|e| format!("{} {:?} {:?}\n", e.epoch, e.mean_loss, e.lr))
            .collect()
    }
}

/// Mean total loss over a batch and its gradient with respect to all head
/// parameters.
pub fn batch_loss_and_grads(
    params: &HeadParams,
    features: &[f64],
    targets: &[ObjectTarget],
    layout: &BinLayout,
    loss_cfg: &LossConfig,
) -> Result<(f64, HeadParams), NetError> {
    let (out, cache) = forward(params, features)?;
    let loss = total_loss(&out.predictions(), targets, layout, loss_cfg)?;
    let dy = HeadOutputs::from_object_grads(&loss.gradient, out.batch, out.n_bins)?;
    let grads = backward(params, &cache, &dy, false)?;
    Ok((loss.value, grads.params))
}

fn parallel_loss_and_grads(
    params: &HeadParams,
    features: &[f64],
    targets: &[ObjectTarget],
    layout: &BinLayout,
    loss_cfg: &LossConfig,
    threads: usize,
) -> Result<(f64, HeadParams), NetError> {
    let batch = targets.len();
    if threads <= 1 || batch < 2 {
        return batch_loss_and_grads(params, features, targets, layout, loss_cfg);
    }
    let d = params.config.feature_dim;
    let chunk = batch.div_ceil(threads);
    let parts: Vec<Result<(f64, HeadParams, usize), NetError>> = std::thread::scope(|s| {
        let handles: Vec<_> = targets
            .chunks(chunk)
            .zip(features.chunks(chunk * d))
            .map(|(t, f)| {
                s.spawn(move || {
                    batch_loss_and_grads(params, f, t, layout, loss_cfg)
                        .map(|(v, g)| (v, g, t.len()))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    let mut value = 0.0;
    let mut grads = HeadParams::zeros(params.config);
    for part in parts {
        let (v, mut g, n) = part?;
        let w = n as f64 / batch as f64;
        value += w * v;
        for t in g.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= w);
        }
        grads.add_assign(&g);
    }
    Ok((value, grads))
}

/// Minibatch AdamW training with per-epoch plateau scheduling on the mean
/// training loss.
pub fn train(
    data: &Dataset,
    head_cfg: &HeadConfig,
    layout: &BinLayout,
    loss_cfg: &LossConfig,
    cfg: &TrainConfig,
) -> Result<TrainReport, NetError> {
    if data.is_empty() {
        return Err(NetError::EmptyDataset);
    }
    if data.feature_dim != head_cfg.feature_dim {
        return Err(NetError::Shape(format!(
            "dataset features have width {}, head expects {}",
            data.feature_dim, head_cfg.feature_dim
        )));
    }
    if head_cfg.n_bins != layout.n_bins() {
        return Err(NetError::BadConfig(format!(
            "head has {} bins but layout has {}",
            head_cfg.n_bins,
            layout.n_bins()
        )));
    }
    if cfg.batch_size == 0 {
        return Err(NetError::BadConfig("batch size must be >= 1".into()));
    }
    loss_cfg.validate()?;
    let noise = if cfg.feature_noise_sigma > 0.0 {
        Some(
            Normal::new(0.0, cfg.feature_noise_sigma)
                .map_err(|e| NetError::BadConfig(e.to_string()))?,
        )
    } else {
        None
    };

    let mut params = init_params(head_cfg)?;
    let mut opt = OptimizerState::for_params(cfg.optimizer, &params);
    let mut sched = SchedulerState::new(
        cfg.optimizer.lr,
        cfg.plateau_factor,
        cfg.plateau_patience,
        cfg.plateau_threshold,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let d = data.feature_dim;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let lr = sched.lr;
        opt.set_lr(lr);
        let mut loss_sum = 0.0;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let mut feats: Vec<f64> = Vec::with_capacity(idx.len() * d);
            for &i in idx {
                feats.extend_from_slice(data.row(i));
            }
            if let Some(n) = &noise {
                feats.iter_mut().for_each(|x| *x += n.sample(&mut rng));
            }
            let targets: Vec<ObjectTarget> = idx.iter().map(|&i| data.targets[i].clone()).collect();
            let (loss, grads) =
                parallel_loss_and_grads(&params, &feats, &targets, layout, loss_cfg, cfg.threads)?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(NetError::NonFinite { epoch, batch: b });
            }
            loss_sum += loss * idx.len() as f64;
            adamw_step(&mut opt, &mut params, &grads);
        }
        let mean_loss = loss_sum / data.len() as f64;
        history.push(EpochStats {
            epoch,
            mean_loss,
            lr,
        });
        scheduler_step(&mut sched, mean_loss);
    }
    Ok(TrainReport { params, history })
}

/// Decoded local angle and deviation offsets for one row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawPrediction {
    pub theta_l: f64,
    pub delta: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub theta_l: f64,
    pub dims: Dims,
}

pub fn predict_raw(
    params: &HeadParams,
    features: &[f64],
    layout: &BinLayout,
) -> Result<Vec<RawPrediction>, NetError> {
    let out = infer(params, features)?;
    (0..out.batch)
        .map(|r| {
            let p = out.prediction(r);
            Ok(RawPrediction {
                theta_l: decode(&p.bins, layout)?,
                delta: p.delta,
            })
        })
        .collect()
}

/// Local angle and absolute dimensions (`dims_mean + delta`).
pub fn predict(
    params: &HeadParams,
    features: &[f64],
    layout: &BinLayout,
    dims_mean: Dims,
) -> Result<Vec<Prediction>, NetError> {
    let m = dims_mean.to_array();
    Ok(predict_raw(params, features, layout)?
        .into_iter()
        .map(|p| Prediction {
            theta_l: p.theta_l,
            dims: Dims::from_array(std::array::from_fn(|k| m[k] + p.delta[k])),
        })
        .collect())
}
