//! MultiBin orientation coding.
//!
//! The angle circle is split into `n` evenly spaced bins whose half-width is
//! widened by `overlap_fraction`, so neighbouring bins share a band of angles.
//! Each bin predicts a confidence score and a `(sin, cos)` residual that
//! rotates the bin center onto the angle.

use std::f64::consts::PI;

use thiserror::Error;

use crate::geometry::wrap_angle;

pub const DEFAULT_BINS: usize = 2;
pub const DEFAULT_OVERLAP: f64 = 0.1;

/// Residual pairs shorter than this cannot be decoded into a direction.
pub const MIN_RESIDUAL_NORM: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MultiBinError {
    #[error("bin count must be at least 1")]
    NoBins,
    #[error("overlap fraction {0} outside [0, 1)")]
    BadOverlap(f64),
    #[error("prediction has {found} bins, layout has {expected}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("residual of bin {bin} has zero length")]
    ZeroResidual { bin: usize },
    #[error("prediction contains non-finite values")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinLayout {
    n_bins: usize,
    overlap_fraction: f64,
    centers: Vec<f64>,
    half_width: f64,
}

impl BinLayout {
    pub fn new(n_bins: usize, overlap_fraction: f64) -> Result<Self, MultiBinError> {
        make_layout(n_bins, overlap_fraction)
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn overlap_fraction(&self) -> f64 {
        self.overlap_fraction
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Bins whose interval contains `theta`, in index order.
    pub fn covering(&self, theta: f64) -> Vec<usize> {
        let mut cover: Vec<usize> = (0..self.n_bins)
            .filter(|&i| wrap_angle(theta - self.centers[i]).abs() <= self.half_width)
            .collect();
        // rounding at an exact boundary can leave a gap when overlap is zero
        if cover.is_empty() {
            cover.push(self.nearest(theta));
        }
        cover
    }

    /// Bin with the closest center; ties go to the lowest index.
    pub fn nearest(&self, theta: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, &c) in self.centers.iter().enumerate() {
            let d = wrap_angle(theta - c).abs();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }
}

impl Default for BinLayout {
    fn default() -> Self {
        make_layout(DEFAULT_BINS, DEFAULT_OVERLAP).expect("default layout is valid")
    }
}

pub fn make_layout(n_bins: usize, overlap_fraction: f64) -> Result<BinLayout, MultiBinError> {
    if n_bins == 0 {
        return Err(MultiBinError::NoBins);
    }
    if !(0.0..1.0).contains(&overlap_fraction) {
        return Err(MultiBinError::BadOverlap(overlap_fraction));
    }
    let n = n_bins as f64;
    let centers = (0..n_bins)
        .map(|i| wrap_angle(-PI + 2.0 * PI * (i as f64 + 0.5) / n))
        .collect();
    Ok(BinLayout {
        n_bins,
        overlap_fraction,
        centers,
        half_width: PI / n * (1.0 + overlap_fraction),
    })
}

/// Training targets for one angle.
#[derive(Debug, Clone, PartialEq)]
pub struct BinTargets {
    /// The encoded angle, wrapped.
    pub theta: f64,
    pub score_onehot: usize,
    pub covering: Vec<usize>,
    /// `(sin, cos)` of the offset from each covering bin's center, parallel
    /// to `covering`.
    pub residuals: Vec<[f64; 2]>,
}

/// Raw head outputs for one object.
#[derive(Debug, Clone, PartialEq)]
pub struct BinPrediction {
    pub scores: Vec<f64>,
    /// Unnormalized `(sin, cos)` per bin.
    pub residual_sc: Vec<[f64; 2]>,
}

pub fn encode(theta_l: f64, layout: &BinLayout) -> BinTargets {
    let theta = wrap_angle(theta_l);
    let covering = layout.covering(theta);
    let mut score_onehot = covering[0];
    let mut best = f64::INFINITY;
    for &i in &covering {
        let d = wrap_angle(theta - layout.centers[i]).abs();
        if d < best {
            best = d;
            score_onehot = i;
        }
    }
    let residuals = covering
        .iter()
        .map(|&i| {
            let (s, c) = wrap_angle(theta - layout.centers[i]).sin_cos();
            [s, c]
        })
        .collect();
    BinTargets {
        theta,
        score_onehot,
        covering,
        residuals,
    }
}

/// Turns targets into the prediction that decodes to them exactly: a one-hot
/// score and the true residual on every covering bin.
pub fn targets_as_prediction(t: &BinTargets, layout: &BinLayout) -> BinPrediction {
    let mut scores = vec![0.0; layout.n_bins];
    scores[t.score_onehot] = 1.0;
    let mut residual_sc = vec![[0.0, 1.0]; layout.n_bins];
    for (&i, &r) in t.covering.iter().zip(&t.residuals) {
        residual_sc[i] = r;
    }
    BinPrediction {
        scores,
        residual_sc,
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn decode(pred: &BinPrediction, layout: &BinLayout) -> Result<f64, MultiBinError> {
    let n = layout.n_bins;
    if pred.scores.len() != n || pred.residual_sc.len() != n {
        return Err(MultiBinError::ShapeMismatch {
            expected: n,
            found: pred.scores.len().min(pred.residual_sc.len()),
        });
    }
    if pred
        .scores
        .iter()
        .chain(pred.residual_sc.iter().flatten())
        .any(|v| !v.is_finite())
    {
        return Err(MultiBinError::NonFinite);
    }
    let bin = argmax(&pred.scores);
    let [s, c] = pred.residual_sc[bin];
    if s.hypot(c) <= MIN_RESIDUAL_NORM {
        return Err(MultiBinError::ZeroResidual { bin });
    }
    Ok(wrap_angle(layout.centers[bin] + s.atan2(c)))
}
