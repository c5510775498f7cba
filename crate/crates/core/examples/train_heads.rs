use std::collections::BTreeSet;
use std::time::Instant;

use monolite::geometry::wrap_angle;
use monolite::kitti::compute_dims_stats;
use monolite::losses::LossConfig;
use monolite::multibin::BinLayout;
use monolite::net::{predict, train, Dataset, HeadConfig, TrainConfig};
use monolite::synth::{generate_scene, SceneConfig};

fn main() {
    let scene = generate_scene(&SceneConfig {
        n_objects: 2000,
        ..SceneConfig::default()
    })
    .unwrap();
    let labels = scene.labels();
    let (train_labels, test_labels) = labels.split_at(1600);
    let classes: BTreeSet<String> = ["Car".to_string()].into();
    let stats = compute_dims_stats(train_labels, &classes).unwrap();
    let layout = BinLayout::default();
    let d = scene.config.feature_dim;
    let feats = scene.features();
    let (f_train, f_test) = feats.split_at(1600 * d);
    let data = Dataset::from_labels(train_labels, d, f_train, &stats, &layout).unwrap();
    let head = HeadConfig {
        feature_dim: d,
        ..HeadConfig::default()
    };
    let cfg = TrainConfig {
        epochs: 200,
        ..TrainConfig::default()
    };
    let t = Instant::now();
    let report = train(&data, &head, &layout, &LossConfig::default(), &cfg).unwrap();
    println!(
        "trained in {:.1?}, final loss {:.5}",
        t.elapsed(),
        report.history.last().unwrap().mean_loss
    );
    let mean = stats.mean("Car").unwrap();
    let preds = predict(&report.params, f_test, &layout, mean).unwrap();
    let n = preds.len() as f64;
    let mae = preds
        .iter()
        .zip(test_labels)
        .map(|(p, l)| wrap_angle(p.theta_l - l.alpha).abs())
        .sum::<f64>()
        / n;
    let rmse = (preds
        .iter()
        .zip(test_labels)
        .map(|(p, l)| {
            let (a, b) = (p.dims.to_array(), l.dims.to_array());
            (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>() / 3.0
        })
        .sum::<f64>()
        / n)
        .sqrt();
    println!(
        "held-out angle MAE {:.3} deg, dims RMSE {:.4} m",
        mae.to_degrees(),
        rmse
    );
}
