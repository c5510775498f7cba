//! Encode angles into MultiBin targets and decode predictions back.

use monolite::multibin::{decode, encode, make_layout, targets_as_prediction, BinPrediction};

fn main() {
    let layout = make_layout(4, 0.1).unwrap();
    println!(
        "centers {:?}, half-width {:.4}",
        layout.centers(),
        layout.half_width()
    );
    for theta in [-3.0, -0.8, 0.0, 0.79, 2.5] {
        let t = encode(theta, &layout);
        let back = decode(&targets_as_prediction(&t, &layout), &layout).unwrap();
        println!(
            "theta {theta:+.2}: bin {} covering {:?} decoded {back:+.6}",
            t.score_onehot, t.covering
        );
    }
    let pred = BinPrediction {
        scores: vec![0.1, 2.0, -1.0, 0.3],
        residual_sc: vec![[0.0, 1.0], [0.2, 1.0], [0.0, 1.0], [0.0, 1.0]],
    };
    println!(
        "raw head output decodes to {:+.4}",
        decode(&pred, &layout).unwrap()
    );
}
