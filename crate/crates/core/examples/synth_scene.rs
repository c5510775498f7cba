//! Generate a synthetic scene and write it as a dataset directory.
//!
//! cargo run --example synth_scene -- /tmp/scene

use monolite::synth::{generate_scene, write_dataset, SceneConfig};

fn main() {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "synth_scene_out".into());
    let cfg = SceneConfig {
        n_objects: 25,
        seed: 42,
        ..SceneConfig::default()
    };
    let scene = generate_scene(&cfg).expect("scene");
    for o in scene.objects.iter().take(5) {
        let l = &o.label;
        println!(
            "{} z={:5.1} m  ry={:+.3}  alpha={:+.3}  bbox=({:.0},{:.0})-({:.0},{:.0})",
            l.class_name,
            l.location[2],
            l.rotation_y,
            l.alpha,
            l.bbox.left,
            l.bbox.top,
            l.bbox.right,
            l.bbox.bottom
        );
    }
    write_dataset(&scene, out.as_ref()).expect("write");
    println!("{} objects written to {out}", scene.objects.len());
}
