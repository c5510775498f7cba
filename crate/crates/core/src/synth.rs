//! Synthetic scenes with exact ground truth.
//!
//! Objects sit on a flat ground plane 1.65 m below the camera, with uniform
//! yaw and dimensions drawn around per-class means. Labels are consistent by
//! construction: `alpha` comes from `rotation_y` and the ray through the box
//! location, and the 2D box is the projection of the 3D box. Each object also
//! gets a feature vector, a fixed random linear mix of
//! `[sin theta_l, cos theta_l, dh, dw, dl, 1]` plus Gaussian noise, standing in
//! for backbone features.
//!
//! `write_dataset` produces `labels.txt`, `calib.txt`, `features.mlft` and
//! `manifest.txt` in a directory. Feature files are:
//!
//! ```text
//! "MLFT" | count u32 LE | feature_dim u32 LE | count * feature_dim f32 LE, row-major
//! ```

use std::cmp::Ordering::Less;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use thiserror::Error;

use crate::fsutil::atomic_write;
use crate::geometry::{
    global_to_local, local_to_global, projected_bbox, ray_angle_from_location, wrap_angle, Box3D,
    Pose,
};
use crate::kitti::{
    serialize_calib_file, serialize_label_file, BBox2D, CameraIntrinsics, Dims, ObjectLabel,
};

pub const FEATURE_MAGIC: &[u8; 4] = b"MLFT";
pub const CAMERA_HEIGHT: f64 = 1.65;

pub const LABELS_FILE: &str = "labels.txt";
pub const CALIB_FILE: &str = "calib.txt";
pub const FEATURES_FILE: &str = "features.mlft";
pub const MANIFEST_FILE: &str = "manifest.txt";

/// Number of raw statistics mixed into each feature vector.
pub const LATENT_DIM: usize = 6;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scene config: {0}")]
    BadConfig(String),
    #[error("placed {placed} of {requested} objects after {attempts} attempts (acceptance rate {rate:.4})")]
    RetriesExhausted {
        placed: usize,
        requested: usize,
        attempts: usize,
        rate: f64,
    },
    #[error("generated object {index} violates an invariant: {reason}")]
    Inconsistent { index: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("feature file: {0}")]
    FeatureFormat(String),
    #[error("manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassSpec {
    pub name: String,
    pub mean: Dims,
    pub sigma: Dims,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub n_objects: usize,
    pub image_size: (u32, u32),
    /// `(fu, fv, cu, cv)`
    pub intrinsics: (f64, f64, f64, f64),
    pub classes: Vec<ClassSpec>,
    pub x_range: (f64, f64),
    pub z_range: (f64, f64),
    pub feature_dim: usize,
    pub feature_noise_sigma: f64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            n_objects: 200,
            image_size: (1242, 375),
            intrinsics: (721.5377, 721.5377, 609.5593, 172.854),
            classes: vec![ClassSpec {
                name: "Car".into(),
                mean: Dims::new(1.5, 1.6, 3.9),
                sigma: Dims::new(0.1, 0.08, 0.3),
            }],
            x_range: (-15.0, 15.0),
            z_range: (5.0, 60.0),
            feature_dim: 64,
            feature_noise_sigma: 0.05,
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::BadConfig(m.to_string()));
        if self.classes.is_empty() {
            return bad("at least one class is required");
        }
        if self.x_range.0.partial_cmp(&self.x_range.1) != Some(Less)
            || self.z_range.0.partial_cmp(&self.z_range.1) != Some(Less)
        {
            return bad("location ranges must be nonempty");
        }
        if self.z_range.0 <= 0.0 {
            return bad("z range must be strictly positive");
        }
        if self.image_size.0 == 0 || self.image_size.1 == 0 {
            return bad("image size must be nonzero");
        }
        let (fu, fv, _, _) = self.intrinsics;
        if !(fu > 0.0 && fv > 0.0) {
            return bad("focal lengths must be positive");
        }
        if self.feature_dim == 0 {
            return bad("feature_dim must be >= 1");
        }
        if self.feature_noise_sigma.is_nan() || self.feature_noise_sigma < 0.0 {
            return bad("noise sigma must be >= 0");
        }
        for c in &self.classes {
            if c.name.is_empty() || c.name.contains(char::is_whitespace) {
                return bad("class names must be nonempty tokens");
            }
            if c.mean.to_array().iter().any(|&m| m.is_nan() || m <= 0.0)
                || c.sigma.to_array().iter().any(|&s| s.is_nan() || s < 0.0)
            {
                return bad("class means must be positive and sigmas non-negative");
            }
        }
        Ok(())
    }

    pub fn camera(&self) -> CameraIntrinsics {
        let (fu, fv, cu, cv) = self.intrinsics;
        CameraIntrinsics::from_focal(fu, fv, cu, cv)
    }

    pub fn class(&self, name: &str) -> Option<&ClassSpec> {
        self.classes.iter().find(|c| c.name == name)
    }

    /// `key=value` lines; floats use shortest round-trip formatting.
    pub fn to_manifest(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n_objects={}", self.n_objects);
        let _ = writeln!(s, "image_size={} {}", self.image_size.0, self.image_size.1);
        let (fu, fv, cu, cv) = self.intrinsics;
        let _ = writeln!(s, "intrinsics={fu:?} {fv:?} {cu:?} {cv:?}");
        let _ = writeln!(s, "x_range={:?} {:?}", self.x_range.0, self.x_range.1);
        let _ = writeln!(s, "z_range={:?} {:?}", self.z_range.0, self.z_range.1);
        let _ = writeln!(s, "feature_dim={}", self.feature_dim);
        let _ = writeln!(s, "feature_noise_sigma={:?}", self.feature_noise_sigma);
        let _ = writeln!(s, "seed={}", self.seed);
        for c in &self.classes {
            let (m, d) = (c.mean, c.sigma);
            let _ = writeln!(
                s,
                "class.{}={:?} {:?} {:?} {:?} {:?} {:?}",
                c.name, m.height, m.width, m.length, d.height, d.width, d.length
            );
        }
        s
    }

    pub fn from_manifest(text: &str) -> Result<Self, SynthError> {
        let mut cfg = SceneConfig {
            classes: Vec::new(),
            ..SceneConfig::default()
        };
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let raw = raw.trim();
            if raw.is_empty() || raw.starts_with('#') {
                continue;
            }
            let err = |reason: String| SynthError::Manifest { line, reason };
            let (key, value) = raw
                .split_once('=')
                .ok_or_else(|| err("expected key=value".into()))?;
            let nums = || -> Result<Vec<f64>, SynthError> {
                value
                    .split_whitespace()
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| err(format!("bad number {t:?}")))
                    })
                    .collect()
            };
            let want = |v: Vec<f64>, n: usize| -> Result<Vec<f64>, SynthError> {
                if v.len() == n {
                    Ok(v)
                } else {
                    Err(err(format!("{key} needs {n} values")))
                }
            };
            let int = || {
                value
                    .trim()
                    .parse::<u64>()
                    .map_err(|_| err(format!("bad integer for {key}")))
            };
            match key {
                "n_objects" => cfg.n_objects = int()? as usize,
                "image_size" => {
                    let v = want(nums()?, 2)?;
                    cfg.image_size = (v[0] as u32, v[1] as u32);
                }
                "intrinsics" => {
                    let v = want(nums()?, 4)?;
                    cfg.intrinsics = (v[0], v[1], v[2], v[3]);
                }
                "x_range" => {
                    let v = want(nums()?, 2)?;
                    cfg.x_range = (v[0], v[1]);
                }
                "z_range" => {
                    let v = want(nums()?, 2)?;
                    cfg.z_range = (v[0], v[1]);
                }
                "feature_dim" => cfg.feature_dim = int()? as usize,
                "feature_noise_sigma" => cfg.feature_noise_sigma = want(nums()?, 1)?[0],
                "seed" => cfg.seed = int()?,
                k => {
                    let Some(name) = k.strip_prefix("class.") else {
                        return Err(err(format!("unknown key {k}")));
                    };
                    let v = want(nums()?, 6)?;
                    cfg.classes.push(ClassSpec {
                        name: name.to_string(),
                        mean: Dims::new(v[0], v[1], v[2]),
                        sigma: Dims::new(v[3], v[4], v[5]),
                    });
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Fixed `feature_dim x 6` mixing matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixer {
    pub feature_dim: usize,
    pub weights: Vec<f64>,
}

impl Mixer {
    pub fn random(feature_dim: usize, rng: &mut impl Rng) -> Self {
        let weights = (0..feature_dim * LATENT_DIM)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        Self {
            feature_dim,
            weights,
        }
    }

    pub fn apply(&self, latent: &[f64; LATENT_DIM]) -> Vec<f64> {
        self.weights
            .chunks_exact(LATENT_DIM)
            .map(|row| row.iter().zip(latent).map(|(w, z)| w * z).sum())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthObject {
    pub label: ObjectLabel,
    pub feature: Vec<f64>,
    /// Local (observation) angle, equal to `label.alpha`.
    pub theta_l: f64,
    /// `dims - class mean`, `(h, w, l)`.
    pub deviation: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub config: SceneConfig,
    pub intrinsics: CameraIntrinsics,
    pub mixer: Mixer,
    pub objects: Vec<SynthObject>,
}

impl Scene {
    pub fn labels(&self) -> Vec<ObjectLabel> {
        self.objects.iter().map(|o| o.label.clone()).collect()
    }

    /// Row-major `n x feature_dim`.
    pub fn features(&self) -> Vec<f64> {
        self.objects
            .iter()
            .flat_map(|o| o.feature.iter().copied())
            .collect()
    }
}

/// `mixer * [sin theta_l, cos theta_l, dh, dw, dl, 1] + N(0, noise_sigma)`.
pub fn make_features(
    obj: &SynthObject,
    mixer: &Mixer,
    noise_sigma: f64,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let (s, c) = obj.theta_l.sin_cos();
    let [dh, dw, dl] = obj.deviation;
    let mut f = mixer.apply(&[s, c, dh, dw, dl, 1.0]);
    if noise_sigma > 0.0 {
        let n = Normal::new(0.0, noise_sigma).expect("sigma checked non-negative");
        f.iter_mut().for_each(|x| *x += n.sample(rng));
    }
    f
}

/// Checks the three label invariants: yaw decomposition, ground contact and
/// 2D/3D box agreement.
pub fn check_object(
    obj: &SynthObject,
    k: &CameraIntrinsics,
    image_size: (u32, u32),
) -> Result<(), String> {
    let l = &obj.label;
    let ray = ray_angle_from_location(l.location).map_err(|e| e.to_string())?;
    let gap = wrap_angle(l.rotation_y - l.alpha - ray);
    if gap.abs() > 1e-9 {
        return Err(format!("rotation_y - alpha - ray = {gap:e}"));
    }
    if (l.location[1] - CAMERA_HEIGHT).abs() > 1e-12 {
        return Err(format!(
            "box bottom at y = {} is off the ground plane",
            l.location[1]
        ));
    }
    let b = Box3D::new(l.dims, Pose::new(l.rotation_y, l.location));
    let r = projected_bbox(&b, k, image_size)
        .map_err(|e| e.to_string())?
        .rect;
    let worst = [
        r.left - l.bbox.left,
        r.top - l.bbox.top,
        r.right - l.bbox.right,
        r.bottom - l.bbox.bottom,
    ]
    .iter()
    .fold(0.0f64, |m, d| m.max(d.abs()));
    if worst > 0.5 {
        return Err(format!("2D box differs from the projection by {worst} px"));
    }
    Ok(())
}

fn sample_dims(spec: &ClassSpec, rng: &mut impl Rng) -> Dims {
    let m = spec.mean.to_array();
    let s = spec.sigma.to_array();
    Dims::from_array(std::array::from_fn(|k| loop {
        let z: f64 = rng.sample(StandardNormal);
        let v = m[k] + s[k] * z;
        if v > 0.05 {
            break v;
        }
    }))
}

pub fn generate_scene(cfg: &SceneConfig) -> Result<Scene, SynthError> {
    cfg.validate()?;
    let k = cfg.camera();
    let (w, h) = (cfg.image_size.0 as f64, cfg.image_size.1 as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mixer = Mixer::random(cfg.feature_dim, &mut rng);
    let max_attempts = 100 * cfg.n_objects;
    let mut attempts = 0;
    let mut objects = Vec::with_capacity(cfg.n_objects);

    while objects.len() < cfg.n_objects {
        if attempts >= max_attempts {
            return Err(SynthError::RetriesExhausted {
                placed: objects.len(),
                requested: cfg.n_objects,
                attempts,
                rate: objects.len() as f64 / attempts.max(1) as f64,
            });
        }
        attempts += 1;
        let spec = &cfg.classes[rng.gen_range(0..cfg.classes.len())];
        let dims = sample_dims(spec, &mut rng);
        let x = rng.gen_range(cfg.x_range.0..cfg.x_range.1);
        let z = rng.gen_range(cfg.z_range.0..cfg.z_range.1);
        let rotation_y = wrap_angle(rng.gen_range(-PI..PI));
        let location = [x, CAMERA_HEIGHT, z];
        let b = Box3D::new(dims, Pose::new(rotation_y, location));
        let Ok(p) = projected_bbox(&b, &k, cfg.image_size) else {
            continue;
        };
        let r = p.rect;
        if p.clipped
            || p.degenerate
            || !(r.left > 0.0 && r.top > 0.0 && r.right < w && r.bottom < h)
        {
            continue;
        }
        let ray = ray_angle_from_location(location).expect("z range is positive");
        let alpha = global_to_local(rotation_y, ray);
        debug_assert!(wrap_angle(local_to_global(alpha, ray) - rotation_y).abs() < 1e-12);
        let m = spec.mean.to_array();
        let d = dims.to_array();
        let mut obj = SynthObject {
            label: ObjectLabel {
                class_name: spec.name.clone(),
                truncation: 0.0,
                occlusion: 0,
                alpha,
                bbox: BBox2D::new(r.left, r.top, r.right, r.bottom),
                dims,
                location,
                rotation_y,
                score: None,
            },
            feature: Vec::new(),
            theta_l: alpha,
            deviation: std::array::from_fn(|i| d[i] - m[i]),
        };
        obj.feature = make_features(&obj, &mixer, cfg.feature_noise_sigma, &mut rng);
        check_object(&obj, &k, cfg.image_size).map_err(|reason| SynthError::Inconsistent {
            index: objects.len(),
            reason,
        })?;
        objects.push(obj);
    }
    Ok(Scene {
        config: cfg.clone(),
        intrinsics: k,
        mixer,
        objects,
    })
}

pub fn encode_features(feature_dim: usize, rows: &[f64]) -> Vec<u8> {
    assert!(
        feature_dim > 0 && rows.len().is_multiple_of(feature_dim),
        "ragged feature matrix"
    );
    let count = rows.len() / feature_dim;
    let mut out = Vec::with_capacity(12 + 4 * rows.len());
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&(count as u32).to_le_bytes());
    out.extend_from_slice(&(feature_dim as u32).to_le_bytes());
    for &v in rows {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

/// Returns `(feature_dim, row-major values)`.
pub fn decode_features(bytes: &[u8]) -> Result<(usize, Vec<f64>), SynthError> {
    let bad = |m: &str| SynthError::FeatureFormat(m.to_string());
    if bytes.len() < 12 || &bytes[..4] != FEATURE_MAGIC {
        return Err(bad("missing MLFT header"));
    }
    let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if dim == 0 {
        return Err(bad("feature_dim is zero"));
    }
    let body = &bytes[12..];
    if Some(body.len()) != count.checked_mul(dim).and_then(|n| n.checked_mul(4)) {
        return Err(bad("payload size does not match count x feature_dim"));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok((dim, values))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), SynthError> {
    atomic_write(path, bytes).map_err(|source| SynthError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes labels, calibration, features and the generating manifest.
pub fn write_dataset(scene: &Scene, dir: &Path) -> Result<(), SynthError> {
    std::fs::create_dir_all(dir).map_err(|source| SynthError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write(
        &dir.join(LABELS_FILE),
        serialize_label_file(&scene.labels()).as_bytes(),
    )?;
    write(
        &dir.join(CALIB_FILE),
        serialize_calib_file(&scene.intrinsics).as_bytes(),
    )?;
    write(
        &dir.join(FEATURES_FILE),
        &encode_features(scene.config.feature_dim, &scene.features()),
    )?;
    write(
        &dir.join(MANIFEST_FILE),
        scene.config.to_manifest().as_bytes(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ray_angle_from_location;

    fn small(n: usize, seed: u64) -> SceneConfig {
        SceneConfig {
            n_objects: n,
            feature_dim: 16,
            seed,
            ..SceneConfig::default()
        }
    }

    #[test]
    fn empty_scene() {
        let s = generate_scene(&small(0, 1)).unwrap();
        assert!(s.objects.is_empty());
    }

    #[test]
    fn seeded_generation_repeats() {
        assert_eq!(
            generate_scene(&small(20, 4)).unwrap(),
            generate_scene(&small(20, 4)).unwrap()
        );
        assert_ne!(
            generate_scene(&small(20, 4)).unwrap(),
            generate_scene(&small(20, 5)).unwrap()
        );
    }

    #[test]
    fn yaw_identity_holds_for_every_object() {
        let s = generate_scene(&small(1000, 9)).unwrap();
        for o in &s.objects {
            let l = &o.label;
            let ray = ray_angle_from_location(l.location).unwrap();
            assert!(wrap_angle(l.rotation_y - l.alpha - ray).abs() < 1e-9);
            let (w, h) = s.config.image_size;
            assert!(
                l.bbox.left > 0.0
                    && l.bbox.right < w as f64
                    && l.bbox.top > 0.0
                    && l.bbox.bottom < h as f64
            );
        }
    }

    #[test]
    fn impossible_placement_exhausts_retries() {
        let cfg = SceneConfig {
            x_range: (500.0, 600.0),
            z_range: (1.0, 2.0),
            ..small(3, 0)
        };
        assert!(matches!(
            generate_scene(&cfg),
            Err(SynthError::RetriesExhausted { placed: 0, .. })
        ));
    }

    #[test]
    fn noiseless_features_repeat_for_equal_latents() {
        let s = generate_scene(&SceneConfig {
            feature_noise_sigma: 0.0,
            ..small(2, 3)
        })
        .unwrap();
        let mut a = s.objects[0].clone();
        let mut b = s.objects[1].clone();
        a.theta_l = 0.4;
        b.theta_l = 0.4;
        a.deviation = [0.1, -0.1, 0.2];
        b.deviation = [0.1, -0.1, 0.2];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            make_features(&a, &s.mixer, 0.0, &mut rng),
            make_features(&b, &s.mixer, 0.0, &mut rng)
        );
    }

    /// Numerical rank by Gaussian elimination with partial pivoting.
    #[allow(clippy::needless_range_loop)]
    fn rank(mut rows: Vec<Vec<f64>>, tol: f64) -> usize {
        let cols = rows[0].len();
        let mut r = 0;
        for c in 0..cols {
            let Some(p) =
                (r..rows.len()).max_by(|&a, &b| rows[a][c].abs().total_cmp(&rows[b][c].abs()))
            else {
                break;
            };
            if rows[p][c].abs() < tol {
                continue;
            }
            rows.swap(r, p);
            for i in r + 1..rows.len() {
                let f = rows[i][c] / rows[r][c];
                for j in c..cols {
                    rows[i][j] -= f * rows[r][j];
                }
            }
            r += 1;
            if r == rows.len() {
                break;
            }
        }
        r
    }

    #[test]
    fn noiseless_features_span_six_dimensions() {
        let s = generate_scene(&SceneConfig {
            feature_noise_sigma: 0.0,
            ..small(40, 6)
        })
        .unwrap();
        let rows: Vec<Vec<f64>> = s.objects.iter().map(|o| o.feature.clone()).collect();
        assert_eq!(rank(rows, 1e-9), LATENT_DIM);
    }

    #[test]
    fn noisy_feature_mean_converges() {
        let s = generate_scene(&small(1, 2)).unwrap();
        let obj = &s.objects[0];
        let clean = make_features(obj, &s.mixer, 0.0, &mut ChaCha8Rng::seed_from_u64(0));
        let sigma = 0.3;
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut acc = vec![0.0; clean.len()];
        for _ in 0..1000 {
            for (a, v) in acc
                .iter_mut()
                .zip(make_features(obj, &s.mixer, sigma, &mut rng))
            {
                *a += v / 1000.0;
            }
        }
        let bound = 5.0 * sigma / 1000f64.sqrt();
        for (a, c) in acc.iter().zip(&clean) {
            assert!((a - c).abs() < bound);
        }
    }

    #[test]
    fn dims_mean_tracks_config() {
        let cfg = small(600, 12);
        let s = generate_scene(&cfg).unwrap();
        let spec = &cfg.classes[0];
        let n = s.objects.len() as f64;
        for k in 0..3 {
            let mean = s
                .objects
                .iter()
                .map(|o| o.label.dims.to_array()[k])
                .sum::<f64>()
                / n;
            let bound = 4.0 * spec.sigma.to_array()[k] / n.sqrt();
            assert!((mean - spec.mean.to_array()[k]).abs() < bound);
        }
    }

    #[test]
    fn feature_file_roundtrip() {
        let rows = vec![0.5, -1.25, 3.0, 7.5, 0.0, -2.0];
        let bytes = encode_features(3, &rows);
        assert_eq!(&bytes[..4], b"MLFT");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
        let (dim, back) = decode_features(&bytes).unwrap();
        assert_eq!((dim, back), (3, rows));
        assert!(decode_features(&bytes[..bytes.len() - 2]).is_err());
        assert!(decode_features(b"MLFX\0\0\0\0\0\0\0\0").is_err());
    }

    #[test]
    fn manifest_roundtrip() {
        let cfg = SceneConfig {
            classes: vec![
                ClassSpec {
                    name: "Car".into(),
                    mean: Dims::new(1.5, 1.6, 3.9),
                    sigma: Dims::new(0.1, 0.1, 0.3),
                },
                ClassSpec {
                    name: "Van".into(),
                    mean: Dims::new(2.2, 1.9, 5.1),
                    sigma: Dims::new(0.2, 0.1, 0.4),
                },
            ],
            seed: 99,
            ..SceneConfig::default()
        };
        assert_eq!(SceneConfig::from_manifest(&cfg.to_manifest()).unwrap(), cfg);
        assert!(SceneConfig::from_manifest("bogus=1\nclass.Car=1 1 1 0 0 0").is_err());
    }
}
