//! Three-branch fully connected estimation head.
//!
//! A shared feature vector feeds three independent two-layer branches
//! (`feature_dim -> hidden_dim -> out`, ReLU in between, linear output):
//! dimension deviations (3 outputs), bin scores (`n_bins`) and bin residuals
//! (`2 * n_bins`, interleaved `sin, cos`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::NetError;
use crate::losses::ObjectPrediction;
use crate::multibin::{BinPrediction, DEFAULT_BINS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeadConfig {
    pub feature_dim: usize,
    pub hidden_dim: usize,
    pub n_bins: usize,
    pub seed: u64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        Self {
            feature_dim: 1280,
            hidden_dim: 256,
            n_bins: DEFAULT_BINS,
            seed: 0,
        }
    }
}

impl HeadConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        if self.feature_dim == 0 || self.hidden_dim == 0 || self.n_bins == 0 {
            return Err(NetError::BadConfig(format!(
                "dimensions must be >= 1 (feature_dim {}, hidden_dim {}, n_bins {})",
                self.feature_dim, self.hidden_dim, self.n_bins
            )));
        }
        Ok(())
    }
}

/// Dense layer, `y = W x + b`, with `W` stored row-major `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    fn init(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = (6.0 / in_dim as f64).sqrt();
        let weight = (0..in_dim * out_dim)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        Self {
            in_dim,
            out_dim,
            weight,
            bias: vec![0.0; out_dim],
        }
    }

    /// `y[b] = W x[b] + bias` for a row-major batch.
    fn forward(&self, x: &[f64], batch: usize) -> Vec<f64> {
        let mut y: Vec<f64> = (0..batch).flat_map(|_| self.bias.iter().copied()).collect();
        // SAFETY: strides describe the row-major buffers allocated above
        unsafe {
            matrixmultiply::dgemm(
                batch,
                self.in_dim,
                self.out_dim,
                1.0,
                x.as_ptr(),
                self.in_dim as isize,
                1,
                self.weight.as_ptr(),
                1,
                self.in_dim as isize,
                1.0,
                y.as_mut_ptr(),
                self.out_dim as isize,
                1,
            );
        }
        y
    }

    /// Accumulates `dW += dY^T X`, `db += sum dY` into `grad`.
    fn accumulate_grads(&self, x: &[f64], dy: &[f64], batch: usize, grad: &mut Linear) {
        unsafe {
            matrixmultiply::dgemm(
                self.out_dim,
                batch,
                self.in_dim,
                1.0,
                dy.as_ptr(),
                1,
                self.out_dim as isize,
                x.as_ptr(),
                self.in_dim as isize,
                1,
                1.0,
                grad.weight.as_mut_ptr(),
                self.in_dim as isize,
                1,
            );
        }
        for row in dy.chunks_exact(self.out_dim) {
            for (g, d) in grad.bias.iter_mut().zip(row) {
                *g += d;
            }
        }
    }

    /// `dX += dY W`.
    fn accumulate_input_grad(&self, dy: &[f64], batch: usize, dx: &mut [f64]) {
        unsafe {
            matrixmultiply::dgemm(
                batch,
                self.out_dim,
                self.in_dim,
                1.0,
                dy.as_ptr(),
                self.out_dim as isize,
                1,
                self.weight.as_ptr(),
                self.in_dim as isize,
                1,
                1.0,
                dx.as_mut_ptr(),
                self.in_dim as isize,
                1,
            );
        }
    }
}

/// ReLU that lets NaN through instead of clamping it to zero.
fn relu(pre: &[f64]) -> Vec<f64> {
    pre.iter()
        .map(|&z| if z > 0.0 || z.is_nan() { z } else { 0.0 })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub hidden: Linear,
    pub output: Linear,
}

impl Branch {
    fn forward(&self, x: &[f64], batch: usize) -> (Vec<f64>, Vec<f64>) {
        let pre = self.hidden.forward(x, batch);
        (self.output.forward(&relu(&pre), batch), pre)
    }

    fn tensors(&self) -> [&[f64]; 4] {
        [
            &self.hidden.weight,
            &self.hidden.bias,
            &self.output.weight,
            &self.output.bias,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut [f64]; 4] {
        [
            &mut self.hidden.weight,
            &mut self.hidden.bias,
            &mut self.output.weight,
            &mut self.output.bias,
        ]
    }
}

/// Weights of all three branches. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub config: HeadConfig,
    pub dims: Branch,
    pub scores: Branch,
    pub residuals: Branch,
}

fn branch_outputs(n_bins: usize) -> [usize; 3] {
    [3, n_bins, 2 * n_bins]
}

impl HeadParams {
    pub fn zeros(config: HeadConfig) -> Self {
        let [a, b, c] = branch_outputs(config.n_bins).map(|out| Branch {
            hidden: Linear::zeros(config.feature_dim, config.hidden_dim),
            output: Linear::zeros(config.hidden_dim, out),
        });
        Self {
            config,
            dims: a,
            scores: b,
            residuals: c,
        }
    }

    pub fn branches(&self) -> [&Branch; 3] {
        [&self.dims, &self.scores, &self.residuals]
    }

    /// All tensors in storage order: dims, scores, residuals branch; within a
    /// branch hidden weight, hidden bias, output weight, output bias.
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.branches()
            .into_iter()
            .flat_map(|b| b.tensors())
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(12);
        out.extend(self.dims.tensors_mut());
        out.extend(self.scores.tensors_mut());
        out.extend(self.residuals.tensors_mut());
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    pub fn load_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count());
        let mut offset = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[offset..offset + t.len()]);
            offset += t.len();
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Elementwise `self += other`.
    pub fn add_assign(&mut self, other: &HeadParams) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

/// Fan-in uniform initialization with zero biases.
pub fn init_params(cfg: &HeadConfig) -> Result<HeadParams, NetError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut branch = |out: usize| Branch {
        hidden: Linear::init(cfg.feature_dim, cfg.hidden_dim, &mut rng),
        output: Linear::init(cfg.hidden_dim, out, &mut rng),
    };
    let [a, b, c] = branch_outputs(cfg.n_bins);
    Ok(HeadParams {
        config: *cfg,
        dims: branch(a),
        scores: branch(b),
        residuals: branch(c),
    })
}

/// Row-major head outputs for a batch. The same shape carries output gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadOutputs {
    pub batch: usize,
    pub n_bins: usize,
    /// `batch x 3`
    pub delta_dims: Vec<f64>,
    /// `batch x n_bins`
    pub scores: Vec<f64>,
    /// `batch x n_bins x 2`
    pub residual_sc: Vec<f64>,
}

impl HeadOutputs {
    pub fn zeros(batch: usize, n_bins: usize) -> Self {
        Self {
            batch,
            n_bins,
            delta_dims: vec![0.0; batch * 3],
            scores: vec![0.0; batch * n_bins],
            residual_sc: vec![0.0; batch * 2 * n_bins],
        }
    }

    pub fn prediction(&self, row: usize) -> ObjectPrediction {
        let n = self.n_bins;
        let d = &self.delta_dims[row * 3..row * 3 + 3];
        ObjectPrediction {
            delta: [d[0], d[1], d[2]],
            bins: BinPrediction {
                scores: self.scores[row * n..(row + 1) * n].to_vec(),
                residual_sc: self.residual_sc[row * 2 * n..(row + 1) * 2 * n]
                    .chunks_exact(2)
                    .map(|p| [p[0], p[1]])
                    .collect(),
            },
        }
    }

    pub fn predictions(&self) -> Vec<ObjectPrediction> {
        (0..self.batch).map(|r| self.prediction(r)).collect()
    }

    /// Splits a batch of flattened per-object gradients (the layout used by
    /// [`crate::losses::total_loss`]) into branch-shaped blocks.
    pub fn from_object_grads(flat: &[f64], batch: usize, n_bins: usize) -> Result<Self, NetError> {
        let per = ObjectPrediction::flat_len(n_bins);
        if flat.len() != batch * per {
            return Err(NetError::Shape(format!(
                "expected {} gradient entries, got {}",
                batch * per,
                flat.len()
            )));
        }
        let mut out = Self::zeros(batch, n_bins);
        for (r, row) in flat.chunks_exact(per).enumerate() {
            out.delta_dims[r * 3..r * 3 + 3].copy_from_slice(&row[..3]);
            out.scores[r * n_bins..(r + 1) * n_bins].copy_from_slice(&row[3..3 + n_bins]);
            out.residual_sc[r * 2 * n_bins..(r + 1) * 2 * n_bins]
                .copy_from_slice(&row[3 + n_bins..]);
        }
        Ok(out)
    }

    fn blocks(&self) -> [&[f64]; 3] {
        [&self.delta_dims, &self.scores, &self.residual_sc]
    }
}

/// Activations retained by [`forward`] for [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch: usize,
    feature_dim: usize,
    features: Vec<f64>,
    /// Hidden pre-activations per branch, `batch x hidden_dim`.
    pre: [Vec<f64>; 3],
}

fn check_features(params: &HeadParams, features: &[f64]) -> Result<usize, NetError> {
    let d = params.config.feature_dim;
    if !features.len().is_multiple_of(d) {
        return Err(NetError::Shape(format!(
            "feature buffer of {} values is not a multiple of feature_dim {d}",
            features.len()
        )));
    }
    Ok(features.len() / d)
}

/// Runs the batch through all three branches. `features` is row-major
/// `batch x feature_dim`.
pub fn forward(
    params: &HeadParams,
    features: &[f64],
) -> Result<(HeadOutputs, ForwardCache), NetError> {
    let batch = check_features(params, features)?;
    let (delta_dims, p0) = params.dims.forward(features, batch);
    let (scores, p1) = params.scores.forward(features, batch);
    let (residual_sc, p2) = params.residuals.forward(features, batch);
    let out = HeadOutputs {
        batch,
        n_bins: params.config.n_bins,
        delta_dims,
        scores,
        residual_sc,
    };
    let cache = ForwardCache {
        batch,
        feature_dim: params.config.feature_dim,
        features: features.to_vec(),
        pre: [p0, p1, p2],
    };
    Ok((out, cache))
}

/// Forward pass without keeping activations.
pub fn infer(params: &HeadParams, features: &[f64]) -> Result<HeadOutputs, NetError> {
    let batch = check_features(params, features)?;
    Ok(HeadOutputs {
        batch,
        n_bins: params.config.n_bins,
        delta_dims: params.dims.forward(features, batch).0,
        scores: params.scores.forward(features, batch).0,
        residual_sc: params.residuals.forward(features, batch).0,
    })
}

#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: HeadParams,
    /// `batch x feature_dim`, when requested.
    pub features: Option<Vec<f64>>,
}

/// Reverse-mode gradients of a scalar objective given its gradient with
/// respect to the head outputs.
pub fn backward(
    params: &HeadParams,
    cache: &ForwardCache,
    out_grad: &HeadOutputs,
    want_input_grad: bool,
) -> Result<Gradients, NetError> {
    let cfg = params.config;
    if cache.feature_dim != cfg.feature_dim
        || out_grad.batch != cache.batch
        || out_grad.n_bins != cfg.n_bins
        || cache
            .pre
            .iter()
            .any(|p| p.len() != cache.batch * cfg.hidden_dim)
    {
        return Err(NetError::Shape(
            "cache or output gradient does not match the parameters".into(),
        ));
    }
    let batch = cache.batch;
    let mut grads = HeadParams::zeros(cfg);
    let mut dx = want_input_grad.then(|| vec![0.0; batch * cfg.feature_dim]);
    let grad_branches = [&mut grads.dims, &mut grads.scores, &mut grads.residuals];
    for (((branch, gbranch), pre), dy) in params
        .branches()
        .into_iter()
        .zip(grad_branches)
        .zip(&cache.pre)
        .zip(out_grad.blocks())
    {
        if dy.len() != batch * branch.output.out_dim {
            return Err(NetError::Shape(
                "output gradient block has the wrong size".into(),
            ));
        }
        let act = relu(pre);
        branch
            .output
            .accumulate_grads(&act, dy, batch, &mut gbranch.output);
        let mut dh = vec![0.0; batch * cfg.hidden_dim];
        branch.output.accumulate_input_grad(dy, batch, &mut dh);
        for (g, &z) in dh.iter_mut().zip(pre) {
            if z <= 0.0 {
                *g = 0.0;
            }
        }
        branch
            .hidden
            .accumulate_grads(&cache.features, &dh, batch, &mut gbranch.hidden);
        if let Some(dx) = dx.as_mut() {
            branch.hidden.accumulate_input_grad(&dh, batch, dx);
        }
    }
    Ok(Gradients {
        params: grads,
        features: dx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> HeadConfig {
        HeadConfig {
            feature_dim: 16,
            hidden_dim: 8,
            n_bins: 2,
            seed: 3,
        }
    }

    /// Independent two-loop matrix-vector product.
    #[allow(clippy::needless_range_loop)]
    fn naive_linear(l: &Linear, x: &[f64]) -> Vec<f64> {
        (0..l.out_dim)
            .map(|o| {
                let mut acc = l.bias[o];
                for i in 0..l.in_dim {
                    acc += l.weight[o * l.in_dim + i] * x[i];
                }
                acc
            })
            .collect()
    }

    fn naive_branch(b: &Branch, x: &[f64]) -> Vec<f64> {
        let h: Vec<f64> = naive_linear(&b.hidden, x)
            .into_iter()
            .map(|z| z.max(0.0))
            .collect();
        naive_linear(&b.output, &h)
    }

    fn random_features(batch: usize, dim: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..batch * dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn init_is_deterministic() {
        let a = init_params(&small()).unwrap();
        assert_eq!(a, init_params(&small()).unwrap());
        let b = init_params(&HeadConfig { seed: 4, ..small() }).unwrap();
        assert_ne!(a, b);
        assert!(a.dims.hidden.bias.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn init_variance_matches_fan_in() {
        let cfg = HeadConfig {
            feature_dim: 1280,
            hidden_dim: 64,
            n_bins: 2,
            seed: 11,
        };
        let p = init_params(&cfg).unwrap();
        let w = &p.dims.hidden.weight;
        let var = w.iter().map(|x| x * x).sum::<f64>() / w.len() as f64;
        let expected = 2.0 / 1280.0;
        assert!(
            (var - expected).abs() < 0.1 * expected,
            "{var} vs {expected}"
        );
    }

    #[test]
    fn zero_features_give_output_bias() {
        let mut p = init_params(&small()).unwrap();
        p.dims.output.bias = vec![0.1, 0.2, 0.3];
        p.scores.output.bias = vec![-1.0, 1.0];
        let (out, _) = forward(&p, &vec![0.0; 2 * 16]).unwrap();
        assert_eq!(out.delta_dims, vec![0.1, 0.2, 0.3, 0.1, 0.2, 0.3]);
        assert_eq!(out.scores, vec![-1.0, 1.0, -1.0, 1.0]);
        assert!(out.residual_sc.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identical_rows_give_identical_outputs() {
        let p = init_params(&small()).unwrap();
        let row = random_features(1, 16, 5);
        let out = infer(&p, &[row.clone(), row].concat()).unwrap();
        assert_eq!(out.prediction(0), out.prediction(1));
    }

    #[test]
    fn forward_matches_naive_oracle() {
        let cfg = HeadConfig {
            feature_dim: 37,
            hidden_dim: 19,
            n_bins: 3,
            seed: 9,
        };
        let p = init_params(&cfg).unwrap();
        let x = random_features(5, 37, 1);
        let (out, _) = forward(&p, &x).unwrap();
        for (r, row) in x.chunks_exact(37).enumerate() {
            let d = naive_branch(&p.dims, row);
            let s = naive_branch(&p.scores, row);
            let q = naive_branch(&p.residuals, row);
            for (a, b) in out.delta_dims[r * 3..r * 3 + 3].iter().zip(&d) {
                assert!((a - b).abs() < 1e-10);
            }
            for (a, b) in out.scores[r * 3..r * 3 + 3].iter().zip(&s) {
                assert!((a - b).abs() < 1e-10);
            }
            for (a, b) in out.residual_sc[r * 6..r * 6 + 6].iter().zip(&q) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn shape_errors() {
        let p = init_params(&small()).unwrap();
        assert!(forward(&p, &[0.0; 15]).is_err());
        let (_, cache) = forward(&p, &[0.0; 32]).unwrap();
        let bad = HeadOutputs::zeros(3, 2);
        assert!(backward(&p, &cache, &bad, false).is_err());
    }

    #[test]
    fn zero_output_grad_gives_zero_param_grad() {
        let p = init_params(&small()).unwrap();
        let (_, cache) = forward(&p, &random_features(4, 16, 2)).unwrap();
        let g = backward(&p, &cache, &HeadOutputs::zeros(4, 2), true).unwrap();
        assert!(g.params.flatten().iter().all(|&v| v == 0.0));
        assert!(g.features.unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn batch_gradient_is_sum_of_example_gradients() {
        let p = init_params(&small()).unwrap();
        let x = random_features(3, 16, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut dy = HeadOutputs::zeros(3, 2);
        for v in dy
            .delta_dims
            .iter_mut()
            .chain(&mut dy.scores)
            .chain(&mut dy.residual_sc)
        {
            *v = rng.gen_range(-1.0..1.0);
        }
        let (_, cache) = forward(&p, &x).unwrap();
        let whole = backward(&p, &cache, &dy, false).unwrap().params;
        let mut summed = HeadParams::zeros(p.config);
        for r in 0..3 {
            let (_, c) = forward(&p, &x[r * 16..(r + 1) * 16]).unwrap();
            let mut row = HeadOutputs::zeros(1, 2);
            row.delta_dims
                .copy_from_slice(&dy.delta_dims[r * 3..r * 3 + 3]);
            row.scores.copy_from_slice(&dy.scores[r * 2..r * 2 + 2]);
            row.residual_sc
                .copy_from_slice(&dy.residual_sc[r * 4..r * 4 + 4]);
            summed.add_assign(&backward(&p, &c, &row, false).unwrap().params);
        }
        for (a, b) in whole.flatten().iter().zip(summed.flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
