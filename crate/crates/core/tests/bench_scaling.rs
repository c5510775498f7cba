use monolite::eval::bench_inference;
use monolite::multibin::BinLayout;
use monolite::net::{init_params, HeadConfig};

#[test]
fn doubling_the_batch_roughly_doubles_latency() {
    let params = init_params(&HeadConfig {
        feature_dim: 1280,
        ..HeadConfig::default()
    })
    .unwrap();
    let layout = BinLayout::default();
    let feats = vec![0.25; 400 * 1280];
    let small = bench_inference(&params, &layout, &feats[..200 * 1280], 30).unwrap();
    let large = bench_inference(&params, &layout, &feats, 30).unwrap();
    let ratio = large.p50 / small.p50;
    assert!((1.5..=3.0).contains(&ratio), "ratio {ratio}");
    assert_eq!(large.batch, 400);
}
