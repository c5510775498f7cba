//! Training objectives with closed-form gradients.
//!
//! Per-object prediction vectors are flattened as
//! `[delta_h, delta_w, delta_l, score_0 .. score_{n-1}, s_0, c_0, .., s_{n-1}, c_{n-1}]`;
//! the orientation-only losses use the same layout without the leading three
//! dimension entries.

use thiserror::Error;

use crate::kitti::Dims;
use crate::multibin::{BinLayout, BinPrediction, BinTargets};

/// Residual pairs shorter than this cannot be normalized.
pub const MIN_NORM: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("residual of bin {bin} is too short to normalize (norm {norm:e})")]
    DegenerateResidual { bin: usize, norm: f64 },
    #[error("no covering bins")]
    EmptyCovering,
    #[error("prediction has {found} bins, layout has {expected}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("{predictions} predictions for {targets} targets")]
    BatchMismatch { predictions: usize, targets: usize },
    #[error("invalid loss weight {0}")]
    BadWeight(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    /// Weight of the residual term in the orientation loss.
    pub alpha_residual: f64,
    /// Weight of the orientation loss relative to the dimension loss.
    pub w_orientation: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            alpha_residual: 1.0,
            w_orientation: 1.0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<(), LossError> {
        for w in [self.alpha_residual, self.w_orientation] {
            if !(w.is_finite() && w > 0.0) {
                return Err(LossError::BadWeight(w));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossValueGrad {
    pub value: f64,
    pub gradient: Vec<f64>,
}

/// Head outputs for one object.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectPrediction {
    pub delta: [f64; 3],
    pub bins: BinPrediction,
}

impl ObjectPrediction {
    pub fn flat_len(n_bins: usize) -> usize {
        3 + 3 * n_bins
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.delta.to_vec();
        v.extend(&self.bins.scores);
        v.extend(self.bins.residual_sc.iter().flatten());
        v
    }

    pub fn from_flat(v: &[f64], n_bins: usize) -> Self {
        assert_eq!(v.len(), Self::flat_len(n_bins));
        Self {
            delta: [v[0], v[1], v[2]],
            bins: BinPrediction {
                scores: v[3..3 + n_bins].to_vec(),
                residual_sc: v[3 + n_bins..]
                    .chunks_exact(2)
                    .map(|p| [p[0], p[1]])
                    .collect(),
            },
        }
    }
}

/// Supervision for one object.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectTarget {
    pub bins: BinTargets,
    pub dims_true: Dims,
    pub dims_mean: Dims,
}

/// Softmax cross-entropy against a single target bin.
pub fn score_loss(logits: &[f64], target_bin: usize) -> LossValueGrad {
    assert!(target_bin < logits.len(), "target bin out of range");
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let value = sum.ln() - (logits[target_bin] - max);
    let mut gradient: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    gradient[target_bin] -= 1.0;
    LossValueGrad { value, gradient }
}

/// Negated mean cosine between the predicted and true in-bin offsets over the
/// covering bins. Predicted `(s, c)` pairs are L2-normalized first.
///
/// The gradient has `2 * n_bins` entries, interleaved `(s, c)`, zero outside
/// the covering set.
pub fn residual_loss(
    pred_sc: &[[f64; 2]],
    theta_star: f64,
    covering: &[usize],
    layout: &BinLayout,
) -> Result<LossValueGrad, LossError> {
    if pred_sc.len() != layout.n_bins() {
        return Err(LossError::ShapeMismatch {
            expected: layout.n_bins(),
            found: pred_sc.len(),
        });
    }
    if covering.is_empty() {
        return Err(LossError::EmptyCovering);
    }
    let inv_n = 1.0 / covering.len() as f64;
    let mut value = 0.0;
    let mut gradient = vec![0.0; 2 * pred_sc.len()];
    for &i in covering {
        let [s, c] = pred_sc[i];
        let norm = s.hypot(c);
        if norm <= MIN_NORM {
            return Err(LossError::DegenerateResidual { bin: i, norm });
        }
        let (sh, ch) = (s / norm, c / norm);
        let (ts, tc) = (theta_star - layout.centers()[i]).sin_cos();
        let cos_sim = tc * ch + ts * sh;
        value -= inv_n * cos_sim;
        // d(t . u/|u|)/du = (t - (t . û) û) / |u|
        gradient[2 * i] = -inv_n * (ts - cos_sim * sh) / norm;
        gradient[2 * i + 1] = -inv_n * (tc - cos_sim * ch) / norm;
    }
    Ok(LossValueGrad { value, gradient })
}

/// `score_loss + alpha * residual_loss`; gradient is `[scores, residuals]`.
pub fn orientation_loss(
    pred: &BinPrediction,
    targets: &BinTargets,
    layout: &BinLayout,
    cfg: &LossConfig,
) -> Result<LossValueGrad, LossError> {
    let n = layout.n_bins();
    if pred.scores.len() != n {
        return Err(LossError::ShapeMismatch {
            expected: n,
            found: pred.scores.len(),
        });
    }
    let score = score_loss(&pred.scores, targets.score_onehot);
    let residual = residual_loss(&pred.residual_sc, targets.theta, &targets.covering, layout)?;
    let mut gradient = score.gradient;
    gradient.extend(residual.gradient.iter().map(|g| cfg.alpha_residual * g));
    Ok(LossValueGrad {
        value: score.value + cfg.alpha_residual * residual.value,
        gradient,
    })
}

/// Mean squared deviation residual over the three dimension components.
pub fn dimension_loss(delta_pred: [f64; 3], dims_true: Dims, dims_mean: Dims) -> LossValueGrad {
    let t = dims_true.to_array();
    let m = dims_mean.to_array();
    let r: [f64; 3] = std::array::from_fn(|k| t[k] - m[k] - delta_pred[k]);
    LossValueGrad {
        value: r.iter().map(|x| x * x).sum::<f64>() / 3.0,
        gradient: r.iter().map(|x| -2.0 * x / 3.0).collect(),
    }
}

/// Batch mean of `dimension_loss + w_orientation * orientation_loss`.
///
/// The gradient holds one flattened per-object block per batch entry.
pub fn total_loss(
    preds: &[ObjectPrediction],
    targets: &[ObjectTarget],
    layout: &BinLayout,
    cfg: &LossConfig,
) -> Result<LossValueGrad, LossError> {
    if preds.is_empty() {
        return Err(LossError::EmptyBatch);
    }
    if preds.len() != targets.len() {
        return Err(LossError::BatchMismatch {
            predictions: preds.len(),
            targets: targets.len(),
        });
    }
    let inv_b = 1.0 / preds.len() as f64;
    let mut value = 0.0;
    let mut gradient =
        Vec::with_capacity(preds.len() * ObjectPrediction::flat_len(layout.n_bins()));
    for (p, t) in preds.iter().zip(targets) {
        let dim = dimension_loss(p.delta, t.dims_true, t.dims_mean);
        let orient = orientation_loss(&p.bins, &t.bins, layout, cfg)?;
        value += inv_b * (dim.value + cfg.w_orientation * orient.value);
        gradient.extend(dim.gradient.iter().map(|g| inv_b * g));
        gradient.extend(
            orient
                .gradient
                .iter()
                .map(|g| inv_b * cfg.w_orientation * g),
        );
    }
    Ok(LossValueGrad { value, gradient })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{central_difference, relative_error, STEP};
    use crate::multibin::{encode, make_layout, targets_as_prediction};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{LN_2, PI};

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0x5eed)
    }

    fn random_sc(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 2]> {
        (0..n)
            .map(|_| {
                // keep away from the origin where normalization blows up
                let a = rng.gen_range(-PI..PI);
                let r = rng.gen_range(0.3..2.0);
                [r * a.sin(), r * a.cos()]
            })
            .collect()
    }

    #[test]
    fn uniform_logits() {
        let l = score_loss(&[0.3, 0.3], 1);
        assert!((l.value - LN_2).abs() < 1e-15);
        assert_eq!(l.gradient, vec![0.5, -0.5]);
    }

    #[test]
    fn large_margin_is_stable() {
        let l = score_loss(&[1000.0, 0.0], 0);
        assert!(l.value.is_finite() && l.value.abs() < 1e-300 + 1e-12);
        assert!(l.gradient.iter().all(|g| g.is_finite()));
    }

    #[test]
    fn score_gradient_matches_fd() {
        let mut rng = rng();
        for _ in 0..100 {
            let n = rng.gen_range(1..6);
            let logits: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let target = rng.gen_range(0..n);
            let fd = central_difference(|z| score_loss(z, target).value, &logits, STEP);
            assert!(relative_error(&score_loss(&logits, target).gradient, &fd) < 1e-6);
        }
    }

    #[test]
    fn score_shift_invariance() {
        let a = score_loss(&[0.2, -1.0, 0.7], 2);
        let b = score_loss(&[5.2, 4.0, 5.7], 2);
        assert!((a.value - b.value).abs() < 1e-12);
        assert!(a.value > 0.0);
    }

    #[test]
    fn residual_extremes() {
        let layout = make_layout(2, 0.1).unwrap();
        for theta in [0.0, 0.4, -2.0, PI] {
            let t = encode(theta, &layout);
            let perfect = targets_as_prediction(&t, &layout);
            let l = residual_loss(&perfect.residual_sc, t.theta, &t.covering, &layout).unwrap();
            assert!((l.value + 1.0).abs() < 1e-12);
            let opposite: Vec<[f64; 2]> =
                perfect.residual_sc.iter().map(|[s, c]| [-s, -c]).collect();
            let l = residual_loss(&opposite, t.theta, &t.covering, &layout).unwrap();
            assert!((l.value - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_rejects_zero_norm() {
        let layout = make_layout(2, 0.1).unwrap();
        let t = encode(0.0, &layout);
        let err =
            residual_loss(&[[0.0, 0.0], [0.0, 1.0]], t.theta, &t.covering, &layout).unwrap_err();
        assert!(matches!(err, LossError::DegenerateResidual { bin: 0, .. }));
    }

    #[test]
    fn residual_gradient_matches_fd() {
        let mut rng = rng();
        for _ in 0..100 {
            let n = rng.gen_range(1..5);
            let layout = make_layout(n, 0.2).unwrap();
            let theta = rng.gen_range(-PI..PI);
            let t = encode(theta, &layout);
            let sc = random_sc(&mut rng, n);
            let flat: Vec<f64> = sc.iter().flatten().copied().collect();
            let f = |x: &[f64]| {
                let sc: Vec<[f64; 2]> = x.chunks_exact(2).map(|p| [p[0], p[1]]).collect();
                residual_loss(&sc, t.theta, &t.covering, &layout)
                    .unwrap()
                    .value
            };
            let analytic = residual_loss(&sc, t.theta, &t.covering, &layout).unwrap();
            assert!((-1.0..=1.0).contains(&analytic.value));
            let fd = central_difference(f, &flat, STEP);
            assert!(relative_error(&analytic.gradient, &fd) < 1e-6);
            for i in (0..n).filter(|i| !t.covering.contains(i)) {
                assert_eq!(analytic.gradient[2 * i], 0.0);
                assert_eq!(analytic.gradient[2 * i + 1], 0.0);
            }
        }
    }

    #[test]
    fn orientation_composition() {
        let layout = make_layout(2, 0.1).unwrap();
        let t = encode(0.7, &layout);
        let p = targets_as_prediction(&t, &layout);
        let cfg = LossConfig::default();
        let l = orientation_loss(&p, &t, &layout, &cfg).unwrap();
        let expected = score_loss(&p.scores, t.score_onehot).value - 1.0;
        assert!((l.value - expected).abs() < 1e-12);

        let mut bins = p.clone();
        bins.residual_sc[0] = [0.4, -0.9];
        bins.residual_sc[1] = [-0.2, 0.3];
        let tiny = LossConfig {
            alpha_residual: 0.0,
            ..cfg
        };
        let l = orientation_loss(&bins, &t, &layout, &tiny).unwrap();
        assert_eq!(l.value, score_loss(&bins.scores, t.score_onehot).value);
    }

    #[test]
    fn orientation_gradient_matches_fd() {
        let mut rng = rng();
        for _ in 0..100 {
            let n = rng.gen_range(1..5);
            let layout = make_layout(n, 0.1).unwrap();
            let t = encode(rng.gen_range(-PI..PI), &layout);
            let cfg = LossConfig {
                alpha_residual: rng.gen_range(0.1..3.0),
                w_orientation: 1.0,
            };
            let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mut flat = scores.clone();
            flat.extend(random_sc(&mut rng, n).iter().flatten());
            let unflat = |x: &[f64]| BinPrediction {
                scores: x[..n].to_vec(),
                residual_sc: x[n..].chunks_exact(2).map(|p| [p[0], p[1]]).collect(),
            };
            let analytic = orientation_loss(&unflat(&flat), &t, &layout, &cfg).unwrap();
            let fd = central_difference(
                |x| {
                    orientation_loss(&unflat(x), &t, &layout, &cfg)
                        .unwrap()
                        .value
                },
                &flat,
                STEP,
            );
            assert!(relative_error(&analytic.gradient, &fd) < 1e-6);
        }
    }

    #[test]
    fn dimension_loss_values() {
        let mean = Dims::new(1.5, 1.6, 3.9);
        let truth = Dims::new(1.7, 1.5, 4.4);
        let perfect = dimension_loss([0.2, -0.1, 0.5], truth, mean);
        assert!(perfect.value.abs() < 1e-24);
        let unit = dimension_loss([0.0; 3], Dims::new(2.5, 2.6, 4.9), mean);
        assert!((unit.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_gradient_and_convexity() {
        let mut rng = rng();
        for _ in 0..100 {
            let d: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let e: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let truth = Dims::new(
                rng.gen_range(1.0..2.0),
                rng.gen_range(1.0..2.0),
                rng.gen_range(3.0..5.0),
            );
            let mean = Dims::new(1.5, 1.6, 3.9);
            let fd = central_difference(
                |x| dimension_loss([x[0], x[1], x[2]], truth, mean).value,
                &d,
                STEP,
            );
            assert!(relative_error(&dimension_loss(d, truth, mean).gradient, &fd) < 1e-8);
            let mid: [f64; 3] = std::array::from_fn(|k| (d[k] + e[k]) / 2.0);
            let lhs = dimension_loss(mid, truth, mean).value;
            let rhs =
                (dimension_loss(d, truth, mean).value + dimension_loss(e, truth, mean).value) / 2.0;
            assert!(lhs <= rhs + 1e-15);
        }
    }

    fn random_example(
        rng: &mut ChaCha8Rng,
        layout: &BinLayout,
    ) -> (ObjectPrediction, ObjectTarget) {
        let n = layout.n_bins();
        let bins = encode(rng.gen_range(-PI..PI), layout);
        let target = ObjectTarget {
            bins,
            dims_true: Dims::new(
                rng.gen_range(1.0..2.0),
                rng.gen_range(1.0..2.0),
                rng.gen_range(3.0..5.0),
            ),
            dims_mean: Dims::new(1.5, 1.6, 3.9),
        };
        let pred = ObjectPrediction {
            delta: std::array::from_fn(|_| rng.gen_range(-0.5..0.5)),
            bins: BinPrediction {
                scores: (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                residual_sc: random_sc(rng, n),
            },
        };
        (pred, target)
    }

    #[test]
    fn total_loss_errors_and_constants() {
        let layout = make_layout(2, 0.1).unwrap();
        let cfg = LossConfig::default();
        assert_eq!(
            total_loss(&[], &[], &layout, &cfg),
            Err(LossError::EmptyBatch)
        );
        let mut rng = rng();
        let (p, t) = random_example(&mut rng, &layout);
        let single = total_loss(
            std::slice::from_ref(&p),
            std::slice::from_ref(&t),
            &layout,
            &cfg,
        )
        .unwrap();
        let triple = total_loss(&vec![p.clone(); 3], &vec![t.clone(); 3], &layout, &cfg).unwrap();
        assert!((single.value - triple.value).abs() < 1e-12);
        let composed = dimension_loss(p.delta, t.dims_true, t.dims_mean).value
            + orientation_loss(&p.bins, &t.bins, &layout, &cfg)
                .unwrap()
                .value;
        assert!((single.value - composed).abs() < 1e-12);
    }

    #[test]
    fn total_gradient_matches_fd() {
        let mut rng = rng();
        let layout = make_layout(2, 0.1).unwrap();
        let per = ObjectPrediction::flat_len(2);
        for _ in 0..100 {
            let cfg = LossConfig {
                alpha_residual: rng.gen_range(0.1..2.0),
                w_orientation: rng.gen_range(0.1..2.0),
            };
            let (preds, targets): (Vec<_>, Vec<_>) =
                (0..4).map(|_| random_example(&mut rng, &layout)).unzip();
            let flat: Vec<f64> = preds.iter().flat_map(|p| p.to_flat()).collect();
            let analytic = total_loss(&preds, &targets, &layout, &cfg).unwrap();
            let fd = central_difference(
                |x| {
                    let ps: Vec<_> = x
                        .chunks_exact(per)
                        .map(|c| ObjectPrediction::from_flat(c, 2))
                        .collect();
                    total_loss(&ps, &targets, &layout, &cfg).unwrap().value
                },
                &flat,
                STEP,
            );
            assert!(relative_error(&analytic.gradient, &fd) < 1e-6);
        }
    }
}
