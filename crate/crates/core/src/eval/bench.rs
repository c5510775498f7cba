use std::time::Instant;

use super::EvalError;
use crate::multibin::BinLayout;
use crate::net::{predict_raw, HeadParams};

/// Per-batch wall-clock seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyStats {
    pub batch: usize,
    pub samples: Vec<f64>,
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
    pub min: f64,
    pub max: f64,
}

impl LatencyStats {
    pub fn per_object(&self) -> f64 {
        self.mean / self.batch.max(1) as f64
    }

    pub fn to_text(&self) -> String {
        format!(
            "batch={}\nrepetitions={}\nmean_s={:.6}\np50_s={:.6}\np95_s={:.6}\nmin_s={:.6}\nmax_s={:.6}\nper_object_s={:.9}\n",
            self.batch,
            self.samples.len(),
            self.mean,
            self.p50,
            self.p95,
            self.min,
            self.max,
            self.per_object()
        )
    }
}

/// Nearest-rank percentile of sorted values.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Times forward plus decode over `features` (row-major batch), after one
/// untimed warm-up pass.
pub fn bench_inference(
    params: &HeadParams,
    layout: &BinLayout,
    features: &[f64],
    repetitions: usize,
) -> Result<LatencyStats, EvalError> {
    if repetitions < 10 {
        return Err(EvalError::Bench("repetitions must be >= 10".into()));
    }
    let d = params.config.feature_dim;
    if features.is_empty() || !features.len().is_multiple_of(d) {
        return Err(EvalError::Bench(format!(
            "feature buffer is not a multiple of {d}"
        )));
    }
    let run = || predict_raw(params, features, layout).map_err(|e| EvalError::Bench(e.to_string()));
    std::hint::black_box(run()?);
    let mut samples = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let t = Instant::now();
        std::hint::black_box(run()?);
        samples.push(t.elapsed().as_secs_f64());
    }
    let mut sorted = samples.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(LatencyStats {
        batch: features.len() / d,
        mean: samples.iter().sum::<f64>() / repetitions as f64,
        p50: percentile(&sorted, 0.5),
        p95: percentile(&sorted, 0.95),
        min: sorted[0],
        max: sorted[repetitions - 1],
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{init_params, HeadConfig};

    #[test]
    fn records_every_repetition() {
        let cfg = HeadConfig {
            feature_dim: 8,
            hidden_dim: 4,
            ..HeadConfig::default()
        };
        let p = init_params(&cfg).unwrap();
        let s = bench_inference(&p, &BinLayout::default(), &vec![0.1; 8 * 5], 10).unwrap();
        assert_eq!(s.samples.len(), 10);
        assert!(s.min <= s.mean && s.mean <= s.max);
        assert!(s.min <= s.p50 && s.p50 <= s.p95 && s.p95 <= s.max);
        assert!(bench_inference(&p, &BinLayout::default(), &[0.1; 8], 9).is_err());
    }
}
