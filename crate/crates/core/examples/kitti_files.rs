//! Parse KITTI label and calibration text, then compute per-class mean dims.

use std::collections::BTreeSet;

use monolite::kitti::{
    compute_dims_stats, parse_calib_file, parse_label_file, serialize_label_file,
};

const LABELS: &str = "\
Car 0.00 0 -1.57 100.0 150.0 220.0 230.0 1.52 1.63 3.88 -2.1 1.65 18.3 -1.68
Car 0.12 1 0.42 600.0 160.0 700.0 210.0 1.48 1.60 4.02 3.4 1.65 32.0 0.52
Pedestrian 0.00 0 2.10 400.0 140.0 430.0 220.0 1.76 0.66 0.84 1.0 1.65 12.0 2.18
DontCare -1 -1 -10 800.0 170.0 850.0 190.0 -1 -1 -1 -1000 -1000 -1000 -10
";

const CALIB: &str =
    "P2: 721.5377 0 609.5593 44.85728 0 721.5377 172.854 0.2163791 0 0 1 0.002745884\n";

fn main() {
    let labels = parse_label_file(LABELS).expect("labels");
    let k = parse_calib_file(CALIB).expect("calib");
    println!("fu={} cu={} cv={}", k.fu, k.cu, k.cv);
    let classes: BTreeSet<String> = ["Car", "Pedestrian"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let stats = compute_dims_stats(&labels, &classes).expect("stats");
    print!("{}", stats.to_text());
    print!("{}", serialize_label_file(&labels[..1]));
}
