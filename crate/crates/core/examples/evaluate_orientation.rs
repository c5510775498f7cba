//! AP and AOS of perturbed detections on a synthetic scene.

use monolite::eval::{evaluate_frames, EvalOptions, Frame};
use monolite::synth::{generate_scene, SceneConfig};
use monolite::wrap_angle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let scene = generate_scene(&SceneConfig {
        n_objects: 400,
        ..SceneConfig::default()
    })
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // one object per frame keeps boxes from overlapping
    let frames: Vec<Frame> = scene
        .objects
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let mut det = o.label.clone();
            det.alpha = wrap_angle(det.alpha + rng.gen_range(-0.3..0.3));
            det.score = Some(rng.gen());
            if i % 10 == 0 {
                det.bbox.right += det.bbox.width();
            }
            Frame {
                name: format!("{i:06}.txt"),
                gt: vec![o.label.clone()],
                det: vec![det],
            }
        })
        .collect();
    let report = evaluate_frames(&frames, &EvalOptions::default()).unwrap();
    print!("{}", report.table());
    print!("{}", report.key_values());
}
