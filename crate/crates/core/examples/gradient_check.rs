//! Compare analytic head gradients with central differences.

use monolite::gradcheck::{central_difference, relative_error, STEP};
use monolite::losses::{LossConfig, ObjectTarget};
use monolite::multibin::{encode, BinLayout};
use monolite::net::{batch_loss_and_grads, init_params, HeadConfig};
use monolite::Dims;

fn main() {
    let layout = BinLayout::default();
    let cfg = HeadConfig {
        feature_dim: 16,
        hidden_dim: 8,
        ..HeadConfig::default()
    };
    let params = init_params(&cfg).unwrap();
    let features: Vec<f64> = (0..3 * 16)
        .map(|i| ((i * 37 % 11) as f64 - 5.0) / 5.0)
        .collect();
    let targets: Vec<ObjectTarget> = [0.3, -2.0, 1.4]
        .iter()
        .map(|&a| ObjectTarget {
            bins: encode(a, &layout),
            dims_true: Dims::new(1.6, 1.5, 4.1),
            dims_mean: Dims::new(1.5, 1.6, 3.9),
        })
        .collect();
    let loss_cfg = LossConfig::default();
    let (loss, grads) =
        batch_loss_and_grads(&params, &features, &targets, &layout, &loss_cfg).unwrap();
    let mut probe = params.clone();
    let numeric = central_difference(
        |x| {
            probe.load_flat(x);
            batch_loss_and_grads(&probe, &features, &targets, &layout, &loss_cfg)
                .unwrap()
                .0
        },
        &params.flatten(),
        STEP,
    );
    println!("loss {loss:.6}, {} parameters", params.param_count());
    println!(
        "relative error {:.2e}",
        relative_error(&grads.flatten(), &numeric)
    );
}
