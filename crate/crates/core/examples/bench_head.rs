//! Time forward plus decode for a batch of 200 at feature_dim 1280.

use monolite::eval::bench_inference;
use monolite::multibin::BinLayout;
use monolite::net::{init_params, HeadConfig};

fn main() {
    let params = init_params(&HeadConfig::default()).unwrap();
    let features: Vec<f64> = (0..200 * 1280)
        .map(|i| (i % 17) as f64 / 17.0 - 0.5)
        .collect();
    let stats = bench_inference(&params, &BinLayout::default(), &features, 50).unwrap();
    print!("{}", stats.to_text());
}
