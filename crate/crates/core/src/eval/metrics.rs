use super::EvalError;

/// Recall grid used for interpolation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ApProtocol {
    /// `{1/40, 2/40, ..., 1}`
    #[default]
    Interp40,
    /// `{0, 0.1, ..., 1}`
    Interp11,
}

impl ApProtocol {
    pub fn grid(self) -> Vec<f64> {
        match self {
            ApProtocol::Interp40 => (1..=40).map(|i| i as f64 / 40.0).collect(),
            ApProtocol::Interp11 => (0..=10).map(|i| i as f64 / 10.0).collect(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ApProtocol::Interp40 => "40-point",
            ApProtocol::Interp11 => "11-point",
        }
    }
}

/// A scored, non-ignored detection: `Some(similarity)` for a true positive,
/// `None` for a false positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ranked {
    pub score: f64,
    pub similarity: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub recall: f64,
    pub precision: f64,
    /// Cumulative orientation similarity over the prefix, divided by its length.
    pub similarity: f64,
}

/// One point per detection prefix, by descending score (stable on ties).
pub fn curve(ranked: &[Ranked], n_valid_gt: usize) -> Result<Vec<CurvePoint>, EvalError> {
    if n_valid_gt == 0 {
        return Err(EvalError::NoGroundTruth);
    }
    let mut order: Vec<usize> = (0..ranked.len()).collect();
    order.sort_by(|&a, &b| ranked[b].score.total_cmp(&ranked[a].score).then(a.cmp(&b)));
    let (mut tp, mut sim) = (0usize, 0.0);
    Ok(order
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            if let Some(s) = ranked[i].similarity {
                tp += 1;
                sim += s;
            }
            let n = (k + 1) as f64;
            CurvePoint {
                recall: tp as f64 / n_valid_gt as f64,
                precision: tp as f64 / n,
                similarity: sim / n,
            }
        })
        .collect())
}

/// Mean over the grid of the best `value` among points with recall >= r, in
/// percent.
pub fn interpolate(
    points: &[CurvePoint],
    protocol: ApProtocol,
    value: impl Fn(&CurvePoint) -> f64,
) -> f64 {
    let grid = protocol.grid();
    let sum: f64 = grid
        .iter()
        .map(|&r| {
            points
                .iter()
                .filter(|p| p.recall >= r - 1e-12)
                .map(&value)
                .fold(0.0, f64::max)
        })
        .sum();
    100.0 * sum / grid.len() as f64
}

pub fn average_precision(
    ranked: &[Ranked],
    n_valid_gt: usize,
    protocol: ApProtocol,
) -> Result<f64, EvalError> {
    Ok(interpolate(&curve(ranked, n_valid_gt)?, protocol, |p| {
        p.precision
    }))
}

pub fn average_orientation_similarity(
    ranked: &[Ranked],
    n_valid_gt: usize,
    protocol: ApProtocol,
) -> Result<f64, EvalError> {
    Ok(interpolate(&curve(ranked, n_valid_gt)?, protocol, |p| {
        p.similarity
    }))
}
