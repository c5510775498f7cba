//! The `monolite` command line: `synth`, `stats`, `train`, `predict`, `eval`
//! and `bench`.
//!
//! Settings resolve as command-line flag, then `--config` file (`key=value`
//! lines, keys are flag names with `_` or `-`), then built-in defaults. Every
//! file is written atomically, so a failed command leaves no partial output.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::eval::{bench_inference, evaluate, ApProtocol, EvalError, EvalOptions};
use crate::fsutil::atomic_write;
use crate::geometry::{local_to_global, ray_angle_from_pixel};
use crate::kitti::{
    compute_dims_stats, parse_calib_file, parse_label_file, serialize_label_file, DimsStats,
    KittiError, ObjectLabel,
};
use crate::losses::LossConfig;
use crate::multibin::{make_layout, MultiBinError};
use crate::net::{
    init_params, predict_raw, train, AdamWConfig, Dataset, HeadConfig, NetError, TrainConfig,
    WeightFile,
};
use crate::synth::{
    decode_features, generate_scene, write_dataset, ClassSpec, SceneConfig, SynthError,
    FEATURES_FILE, LABELS_FILE,
};

/// Unknown location written into result files; depth is not estimated.
pub const UNKNOWN_LOCATION: f64 = -1000.0;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Kitti {
        path: PathBuf,
        #[source]
        source: KittiError,
    },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Layout(#[from] MultiBinError),
    #[error(transparent)]
    Stats(#[from] KittiError),
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Parser)]
#[command(
    name = "monolite",
    version,
    about = "Orientation and dimension heads for monocular 3D detection"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Generate a synthetic dataset (labels, calib, features, manifest).
    Synth(SynthArgs),
    /// Per-class mean dimensions from a label file.
    Stats(StatsArgs),
    /// Train the estimation head on a dataset directory.
    Train(TrainArgs),
    /// Predict orientation and dimensions for 2D detections.
    Predict(PredictArgs),
    /// AP and AOS of detections against ground truth.
    Eval(EvalArgs),
    /// Time head inference.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n_objects: Option<usize>,
    #[arg(long)]
    pub feature_dim: Option<usize>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `name:h,w,l:sh,sw,sl`, repeatable; replaces the default class list.
    #[arg(long = "class")]
    pub classes: Vec<String>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub labels: PathBuf,
    /// Comma-separated class names.
    #[arg(long, value_delimiter = ',', required = true)]
    pub classes: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory holding `labels.txt` and `features.mlft`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub stats: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to `<out>.history.txt`.
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub plateau_factor: Option<f64>,
    #[arg(long)]
    pub plateau_patience: Option<usize>,
    #[arg(long)]
    pub plateau_threshold: Option<f64>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub n_bins: Option<usize>,
    #[arg(long)]
    pub overlap: Option<f64>,
    #[arg(long)]
    pub alpha_residual: Option<f64>,
    #[arg(long)]
    pub w_orientation: Option<f64>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Single-threaded gradient accumulation.
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub weights: PathBuf,
    /// `MLFT` file with one row per detection.
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub calib: PathBuf,
    /// KITTI label or result file supplying class, 2D box and score.
    #[arg(long)]
    pub boxes: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub det: PathBuf,
    #[arg(long, default_value = "Car")]
    pub class: String,
    #[arg(long)]
    pub iou: Option<f64>,
    /// `40` or `11` recall points.
    #[arg(long, default_value_t = 40)]
    pub points: u32,
    /// Print `key=value` lines instead of the table.
    #[arg(long)]
    pub key_values: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Weight file; without it a freshly initialised head is timed.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value_t = 1280)]
    pub feature_dim: usize,
    #[arg(long, default_value_t = 200)]
    pub batch: usize,
    #[arg(long, default_value_t = 50)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// `key=value` settings file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key=value", i + 1)))?;
            values.insert(k.trim().replace('-', "_"), v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            Some(p) => Self::parse(&read_text(p)?),
            None => Ok(Self::default()),
        }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.values
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| CliError::Config(format!("bad value {v:?} for {key}")))
            })
            .transpose()
    }
}

/// Flag, then config file, then default.
fn pick<T: FromStr>(
    flag: Option<T>,
    file: &ConfigFile,
    key: &str,
    default: T,
) -> Result<T, CliError> {
    Ok(match flag {
        Some(v) => v,
        None => file.get(key)?.unwrap_or(default),
    })
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    atomic_write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_labels(path: &Path) -> Result<Vec<ObjectLabel>, CliError> {
    parse_label_file(&read_text(path)?).map_err(|source| CliError::Kitti {
        path: path.to_path_buf(),
        source,
    })
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn parse_class_spec(s: &str) -> Result<ClassSpec, CliError> {
    let bad = || {
        CliError::Usage(format!(
            "class spec {s:?} must look like Car:1.5,1.6,3.9:0.1,0.08,0.3"
        ))
    };
    let mut parts = s.split(':');
    let name = parts.next().filter(|n| !n.is_empty()).ok_or_else(bad)?;
    let mut triple = || -> Result<crate::kitti::Dims, CliError> {
        let v: Vec<f64> = parts
            .next()
            .ok_or_else(bad)?
            .split(',')
            .map(|t| t.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        let [a, b, c] = v[..] else { return Err(bad()) };
        Ok(crate::kitti::Dims::new(a, b, c))
    };
    let mean = triple()?;
    let sigma = triple()?;
    Ok(ClassSpec {
        name: name.to_string(),
        mean,
        sigma,
    })
}

fn cmd_synth(a: &SynthArgs) -> Result<String, CliError> {
    let file = ConfigFile::load(a.config.as_deref())?;
    let base = SceneConfig::default();
    let classes = if a.classes.is_empty() {
        base.classes.clone()
    } else {
        a.classes
            .iter()
            .map(|c| parse_class_spec(c))
            .collect::<Result<_, _>>()?
    };
    let cfg = SceneConfig {
        n_objects: pick(a.n_objects, &file, "n_objects", base.n_objects)?,
        feature_dim: pick(a.feature_dim, &file, "feature_dim", base.feature_dim)?,
        feature_noise_sigma: pick(
            a.noise_sigma,
            &file,
            "noise_sigma",
            base.feature_noise_sigma,
        )?,
        seed: pick(a.seed, &file, "seed", base.seed)?,
        classes,
        ..base
    };
    let scene = generate_scene(&cfg)?;
    write_dataset(&scene, &a.out)?;
    Ok(format!(
        "wrote {} objects to {}\n",
        scene.objects.len(),
        a.out.display()
    ))
}

fn cmd_stats(a: &StatsArgs) -> Result<String, CliError> {
    let labels = read_labels(&a.labels)?;
    let classes: BTreeSet<String> = a.classes.iter().map(|c| c.trim().to_string()).collect();
    let stats = compute_dims_stats(&labels, &classes)?;
    let text = stats.to_text();
    write_file(&a.out, text.as_bytes())?;
    Ok(text)
}

/// Effective training settings, echoed next to the weight file.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub head: HeadConfig,
    pub overlap: f64,
    pub loss: LossConfig,
    pub train: TrainConfig,
}

impl TrainSettings {
    pub fn resolve(a: &TrainArgs, file: &ConfigFile, feature_dim: usize) -> Result<Self, CliError> {
        let dh = HeadConfig::default();
        let dl = LossConfig::default();
        let dt = TrainConfig::default();
        let seed = pick(a.seed, file, "seed", dt.seed)?;
        let deterministic = a.deterministic || file.get("deterministic")?.unwrap_or(false);
        let threads = if deterministic {
            1
        } else {
            pick(a.threads, file, "threads", dt.threads)?
        };
        Ok(Self {
            head: HeadConfig {
                feature_dim,
                hidden_dim: pick(a.hidden_dim, file, "hidden_dim", dh.hidden_dim)?,
                n_bins: pick(a.n_bins, file, "n_bins", dh.n_bins)?,
                seed,
            },
            overlap: pick(a.overlap, file, "overlap", crate::multibin::DEFAULT_OVERLAP)?,
            loss: LossConfig {
                alpha_residual: pick(a.alpha_residual, file, "alpha_residual", dl.alpha_residual)?,
                w_orientation: pick(a.w_orientation, file, "w_orientation", dl.w_orientation)?,
            },
            train: TrainConfig {
                epochs: pick(a.epochs, file, "epochs", dt.epochs)?,
                batch_size: pick(a.batch_size, file, "batch_size", dt.batch_size)?,
                optimizer: AdamWConfig {
                    lr: pick(a.lr, file, "lr", dt.optimizer.lr)?,
                    weight_decay: pick(
                        a.weight_decay,
                        file,
                        "weight_decay",
                        dt.optimizer.weight_decay,
                    )?,
                    ..dt.optimizer
                },
                plateau_factor: pick(a.plateau_factor, file, "plateau_factor", dt.plateau_factor)?,
                plateau_patience: pick(
                    a.plateau_patience,
                    file,
                    "plateau_patience",
                    dt.plateau_patience,
                )?,
                plateau_threshold: pick(
                    a.plateau_threshold,
                    file,
                    "plateau_threshold",
                    dt.plateau_threshold,
                )?,
                seed,
                feature_noise_sigma: pick(
                    a.noise_sigma,
                    file,
                    "noise_sigma",
                    dt.feature_noise_sigma,
                )?,
                threads: threads.max(1),
            },
        })
    }

    pub fn to_text(&self) -> String {
        let (h, l, t) = (&self.head, &self.loss, &self.train);
        let mut s = String::new();
        let _ = writeln!(s, "feature_dim={}", h.feature_dim);
        let _ = writeln!(s, "hidden_dim={}", h.hidden_dim);
        let _ = writeln!(s, "n_bins={}", h.n_bins);
        let _ = writeln!(s, "overlap={:?}", self.overlap);
        let _ = writeln!(s, "alpha_residual={:?}", l.alpha_residual);
        let _ = writeln!(s, "w_orientation={:?}", l.w_orientation);
        let _ = writeln!(s, "epochs={}", t.epochs);
        let _ = writeln!(s, "batch_size={}", t.batch_size);
        let _ = writeln!(s, "lr={:?}", t.optimizer.lr);
        let _ = writeln!(s, "weight_decay={:?}", t.optimizer.weight_decay);
        let _ = writeln!(s, "plateau_factor={:?}", t.plateau_factor);
        let _ = writeln!(s, "plateau_patience={}", t.plateau_patience);
        let _ = writeln!(s, "plateau_threshold={:?}", t.plateau_threshold);
        let _ = writeln!(s, "noise_sigma={:?}", t.feature_noise_sigma);
        let _ = writeln!(s, "seed={}", t.seed);
        let _ = writeln!(s, "threads={}", t.threads);
        s
    }
}

fn cmd_train(a: &TrainArgs) -> Result<String, CliError> {
    let file = ConfigFile::load(a.config.as_deref())?;
    let labels = read_labels(&a.data.join(LABELS_FILE))?;
    let (dim, feats) = decode_features(&read_bytes(&a.data.join(FEATURES_FILE))?)?;
    let stats = DimsStats::from_text(&read_text(&a.stats)?).map_err(|source| CliError::Kitti {
        path: a.stats.clone(),
        source,
    })?;
    let s = TrainSettings::resolve(a, &file, dim)?;
    let layout = make_layout(s.head.n_bins, s.overlap)?;
    let data = Dataset::from_labels(&labels, dim, &feats, &stats, &layout)?;
    let report = train(&data, &s.head, &layout, &s.loss, &s.train)?;
    let weights = WeightFile {
        params: report.params.clone(),
        layout,
        dims_mean: stats
            .classes
            .iter()
            .map(|(k, c)| (k.clone(), c.mean))
            .collect(),
    };
    let history = a
        .history
        .clone()
        .unwrap_or_else(|| with_suffix(&a.out, ".history.txt"));
    write_file(&history, report.history_text().as_bytes())?;
    write_file(&with_suffix(&a.out, ".config.txt"), s.to_text().as_bytes())?;
    write_file(&a.out, &weights.to_bytes())?;
    let last = report
        .history
        .last()
        .map(|e| format!(", final loss {:.6}", e.mean_loss))
        .unwrap_or_default();
    Ok(format!(
        "trained on {} objects for {} epochs{last}\n",
        data.len(),
        s.train.epochs
    ))
}

fn cmd_predict(a: &PredictArgs) -> Result<String, CliError> {
    let w = WeightFile::from_bytes(&read_bytes(&a.weights)?)?;
    let (dim, feats) = decode_features(&read_bytes(&a.features)?)?;
    let k = parse_calib_file(&read_text(&a.calib)?).map_err(|source| CliError::Kitti {
        path: a.calib.clone(),
        source,
    })?;
    let boxes = read_labels(&a.boxes)?;
    if feats.len() != dim * boxes.len() {
        return Err(CliError::Usage(format!(
            "{} feature rows for {} boxes",
            feats.len() / dim,
            boxes.len()
        )));
    }
    let raw = predict_raw(&w.params, &feats, &w.layout)?;
    let results = boxes
        .iter()
        .zip(&raw)
        .map(|(b, p)| {
            let mean = w
                .dims_mean
                .get(&b.class_name)
                .ok_or_else(|| {
                    CliError::Usage(format!(
                        "weights have no mean dims for class {}",
                        b.class_name
                    ))
                })?
                .to_array();
            let ray = ray_angle_from_pixel(b.bbox.center().0, &k);
            Ok(ObjectLabel {
                alpha: p.theta_l,
                dims: crate::kitti::Dims::from_array(std::array::from_fn(|i| mean[i] + p.delta[i])),
                location: [UNKNOWN_LOCATION; 3],
                rotation_y: local_to_global(p.theta_l, ray),
                score: Some(b.score.unwrap_or(1.0)),
                ..b.clone()
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    write_file(&a.out, serialize_label_file(&results).as_bytes())?;
    Ok(format!(
        "wrote {} predictions to {}\n",
        results.len(),
        a.out.display()
    ))
}

fn cmd_eval(a: &EvalArgs) -> Result<String, CliError> {
    let protocol = match a.points {
        40 => ApProtocol::Interp40,
        11 => ApProtocol::Interp11,
        n => {
            return Err(CliError::Usage(format!(
                "--points must be 40 or 11, got {n}"
            )))
        }
    };
    let opts = EvalOptions {
        class_name: a.class.clone(),
        iou_threshold: a.iou,
        protocol,
        ..EvalOptions::default()
    };
    let report = evaluate(&a.gt, &a.det, &opts)?;
    let text = if a.key_values {
        report.key_values()
    } else {
        report.table()
    };
    if let Some(out) = &a.out {
        write_file(out, text.as_bytes())?;
    }
    Ok(text)
}

fn cmd_bench(a: &BenchArgs) -> Result<String, CliError> {
    let (params, layout) = match &a.weights {
        Some(p) => {
            let w = WeightFile::from_bytes(&read_bytes(p)?)?;
            (w.params, w.layout)
        }
        None => {
            let cfg = HeadConfig {
                feature_dim: a.feature_dim,
                ..HeadConfig::default()
            };
            (
                init_params(&cfg)?,
                make_layout(cfg.n_bins, crate::multibin::DEFAULT_OVERLAP)?,
            )
        }
    };
    let d = params.config.feature_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let feats: Vec<f64> = (0..a.batch * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let stats = bench_inference(&params, &layout, &feats, a.reps)?;
    let text = format!("feature_dim={d}\n{}", stats.to_text());
    if let Some(out) = &a.out {
        write_file(out, text.as_bytes())?;
    }
    Ok(text)
}

/// Runs one command and returns what it prints.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_parsing() {
        let c = ConfigFile::parse("# comment\nbatch-size = 50\nlr=0.001\n").unwrap();
        assert_eq!(c.get::<usize>("batch_size").unwrap(), Some(50));
        assert_eq!(c.get::<f64>("lr").unwrap(), Some(0.001));
        assert_eq!(c.get::<f64>("epochs").unwrap(), None);
        assert!(c.get::<usize>("lr").is_err());
        assert!(ConfigFile::parse("oops").is_err());
    }

    #[test]
    fn flag_beats_file_beats_default() {
        let file = ConfigFile::parse("epochs=7\nlr=0.5").unwrap();
        assert_eq!(pick(Some(3usize), &file, "epochs", 250).unwrap(), 3);
        assert_eq!(pick(None, &file, "epochs", 250usize).unwrap(), 7);
        assert_eq!(pick(None, &file, "batch_size", 200usize).unwrap(), 200);
    }

    #[test]
    fn training_defaults() {
        let cli = Cli::try_parse_from([
            "monolite", "train", "--data", "d", "--stats", "s", "--out", "o",
        ])
        .unwrap();
        let Command::Train(a) = &cli.command else {
            panic!()
        };
        let s = TrainSettings::resolve(a, &ConfigFile::default(), 64).unwrap();
        assert_eq!(s.train.epochs, 250);
        assert_eq!(s.train.batch_size, 200);
        assert_eq!(s.train.optimizer.lr, 1e-4);
        assert_eq!(s.train.optimizer.weight_decay, 1e-3);
        assert_eq!(
            (
                s.train.plateau_factor,
                s.train.plateau_patience,
                s.train.plateau_threshold
            ),
            (0.1, 10, 1e-4)
        );
    }

    #[test]
    fn class_specs() {
        let c = parse_class_spec("Van:2.2,1.9,5.1:0.2,0.1,0.4").unwrap();
        assert_eq!(c.name, "Van");
        assert_eq!(c.mean.length, 5.1);
        assert!(parse_class_spec("Van:2.2,1.9").is_err());
    }
}
