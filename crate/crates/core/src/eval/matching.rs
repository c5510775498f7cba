use std::cmp::Ordering;

use super::EvalError;
use crate::kitti::ObjectLabel;

/// Ground truth admitted at one difficulty level.
#[derive(Debug, Clone, PartialEq)]
pub struct DifficultySpec {
    pub name: String,
    pub min_height: f64,
    pub max_occlusion: i32,
    pub max_truncation: f64,
}

impl DifficultySpec {
    fn new(name: &str, min_height: f64, max_occlusion: i32, max_truncation: f64) -> Self {
        Self {
            name: name.to_string(),
            min_height,
            max_occlusion,
            max_truncation,
        }
    }

    pub fn easy() -> Self {
        Self::new("Easy", 40.0, 0, 0.15)
    }

    pub fn moderate() -> Self {
        Self::new("Moderate", 25.0, 1, 0.30)
    }

    pub fn hard() -> Self {
        Self::new("Hard", 25.0, 2, 0.50)
    }

    /// Easy, moderate, hard.
    pub fn standard() -> Vec<Self> {
        vec![Self::easy(), Self::moderate(), Self::hard()]
    }

    pub fn admits(&self, gt: &ObjectLabel) -> bool {
        !gt.is_dont_care()
            && gt.bbox.height() >= self.min_height
            && gt.occlusion <= self.max_occlusion
            && gt.truncation <= self.max_truncation
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetKind {
    TruePositive {
        gt: usize,
        iou: f64,
    },
    FalsePositive,
    /// Matched an ignored ground truth, or too small for the difficulty.
    Ignored,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    /// Detection indices by descending score.
    pub order: Vec<usize>,
    /// Indexed by detection.
    pub kinds: Vec<DetKind>,
    /// Indexed by ground truth; the matching detection, if any.
    pub gt_match: Vec<Option<usize>>,
    pub gt_valid: Vec<bool>,
    pub n_valid_gt: usize,
}

impl MatchOutcome {
    /// `(det, gt)` for each true positive, in score order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.order
            .iter()
            .filter_map(|&d| match self.kinds[d] {
                DetKind::TruePositive { gt, .. } => Some((d, gt)),
                _ => None,
            })
            .collect()
    }

    pub fn true_positives(&self) -> usize {
        self.kinds
            .iter()
            .filter(|k| matches!(k, DetKind::TruePositive { .. }))
            .count()
    }

    pub fn false_positives(&self) -> usize {
        self.kinds
            .iter()
            .filter(|k| matches!(k, DetKind::FalsePositive))
            .count()
    }

    pub fn false_negatives(&self) -> usize {
        self.n_valid_gt - self.true_positives()
    }
}

pub(crate) fn score_order(det: &[ObjectLabel]) -> Result<Vec<usize>, EvalError> {
    let scores: Vec<f64> = det
        .iter()
        .enumerate()
        .map(|(index, d)| d.score.ok_or(EvalError::MissingScore { index }))
        .collect::<Result<_, _>>()?;
    let mut order: Vec<usize> = (0..det.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    Ok(order)
}

/// Best unassigned candidate by IoU, ties to the lowest index.
fn best(cands: impl Iterator<Item = (usize, f64)>) -> Option<(usize, f64)> {
    cands.fold(None, |acc, (i, iou)| match acc {
        Some((_, b)) if iou.partial_cmp(&b) != Some(Ordering::Greater) => acc,
        _ => Some((i, iou)),
    })
}

/// Greedy devkit matching. Detections are visited by descending score; each
/// takes the unassigned ground truth with the highest IoU at or above
/// `iou_threshold` (ties to the lowest index). Taking a valid ground truth is
/// a true positive; taking an ignored one (DontCare or outside the
/// difficulty) makes the detection ignored. A detection that takes nothing is
/// ignored if shorter than the difficulty's minimum height and a false
/// positive otherwise.
pub fn match_detections(
    gt: &[ObjectLabel],
    det: &[ObjectLabel],
    iou_threshold: f64,
    difficulty: &DifficultySpec,
) -> Result<MatchOutcome, EvalError> {
    let order = score_order(det)?;
    let gt_valid: Vec<bool> = gt.iter().map(|g| difficulty.admits(g)).collect();
    let mut gt_match: Vec<Option<usize>> = vec![None; gt.len()];
    let mut kinds = vec![DetKind::FalsePositive; det.len()];

    for &d in &order {
        let candidate = best(
            (0..gt.len())
                .filter(|&g| gt_match[g].is_none())
                .map(|g| (g, gt[g].bbox.iou(&det[d].bbox)))
                .filter(|&(_, iou)| iou >= iou_threshold),
        );
        match candidate {
            Some((g, iou)) => {
                gt_match[g] = Some(d);
                kinds[d] = if gt_valid[g] {
                    DetKind::TruePositive { gt: g, iou }
                } else {
                    DetKind::Ignored
                };
            }
            None if det[d].bbox.height() < difficulty.min_height => kinds[d] = DetKind::Ignored,
            None => {}
        }
    }
    let n_valid_gt = gt_valid.iter().filter(|&&v| v).count();
    Ok(MatchOutcome {
        order,
        kinds,
        gt_match,
        gt_valid,
        n_valid_gt,
    })
}
