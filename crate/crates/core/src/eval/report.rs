use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::matching::{match_detections, DetKind, DifficultySpec};
use super::metrics::{curve, interpolate, ApProtocol, Ranked};
use super::EvalError;
use crate::kitti::{parse_label_file, ObjectLabel};

/// Ground truth and detections for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub name: String,
    pub gt: Vec<ObjectLabel>,
    pub det: Vec<ObjectLabel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub class_name: String,
    /// Defaults to [`default_iou_threshold`] for the class.
    pub iou_threshold: Option<f64>,
    pub protocol: ApProtocol,
    pub difficulties: Vec<DifficultySpec>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            class_name: "Car".into(),
            iou_threshold: None,
            protocol: ApProtocol::default(),
            difficulties: DifficultySpec::standard(),
        }
    }
}

/// 0.7 for Car, 0.5 otherwise.
pub fn default_iou_threshold(class_name: &str) -> f64 {
    if class_name == "Car" {
        0.7
    } else {
        0.5
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPair {
    pub frame: usize,
    pub det: usize,
    pub gt: usize,
    pub iou: f64,
    pub alpha_gt: f64,
    pub alpha_det: f64,
}

/// Interpolated precision and similarity at one recall grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSample {
    pub recall: f64,
    pub precision: f64,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DifficultyResult {
    pub difficulty: DifficultySpec,
    pub ap: f64,
    pub aos: f64,
    pub n_valid_gt: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub pairs: Vec<MatchedPair>,
    pub samples: Vec<GridSample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub class_name: String,
    pub iou_threshold: f64,
    pub protocol: ApProtocol,
    pub results: Vec<DifficultyResult>,
}

fn similarity(alpha_gt: f64, alpha_det: f64) -> f64 {
    (1.0 + (alpha_gt - alpha_det).cos()) / 2.0
}

fn evaluate_difficulty(
    frames: &[Frame],
    iou: f64,
    protocol: ApProtocol,
    difficulty: &DifficultySpec,
) -> Result<DifficultyResult, EvalError> {
    let mut ranked = Vec::new();
    let mut pairs = Vec::new();
    let (mut n_valid_gt, mut fp) = (0, 0);
    for (f, frame) in frames.iter().enumerate() {
        let m = match_detections(&frame.gt, &frame.det, iou, difficulty)?;
        n_valid_gt += m.n_valid_gt;
        for &d in &m.order {
            let score = frame.det[d].score.expect("checked by matching");
            match m.kinds[d] {
                DetKind::TruePositive { gt, iou } => {
                    let (alpha_gt, alpha_det) = (frame.gt[gt].alpha, frame.det[d].alpha);
                    ranked.push(Ranked {
                        score,
                        similarity: Some(similarity(alpha_gt, alpha_det)),
                    });
                    pairs.push(MatchedPair {
                        frame: f,
                        det: d,
                        gt,
                        iou,
                        alpha_gt,
                        alpha_det,
                    });
                }
                DetKind::FalsePositive => {
                    fp += 1;
                    ranked.push(Ranked {
                        score,
                        similarity: None,
                    });
                }
                DetKind::Ignored => {}
            }
        }
    }
    let points = curve(&ranked, n_valid_gt)?;
    let samples = protocol
        .grid()
        .into_iter()
        .map(|r| {
            let above = points.iter().filter(|p| p.recall >= r - 1e-12);
            let (precision, similarity) = above.fold((0.0f64, 0.0f64), |(a, b), p| {
                (a.max(p.precision), b.max(p.similarity))
            });
            GridSample {
                recall: r,
                precision,
                similarity,
            }
        })
        .collect();
    Ok(DifficultyResult {
        difficulty: difficulty.clone(),
        ap: interpolate(&points, protocol, |p| p.precision),
        aos: interpolate(&points, protocol, |p| p.similarity),
        n_valid_gt,
        true_positives: pairs.len(),
        false_positives: fp,
        pairs,
        samples,
    })
}

/// Keeps ground truth of the class plus DontCare regions, and detections of
/// the class.
fn filter_class(frame: &Frame, class_name: &str) -> Frame {
    Frame {
        name: frame.name.clone(),
        gt: frame
            .gt
            .iter()
            .filter(|g| g.class_name == class_name || g.is_dont_care())
            .cloned()
            .collect(),
        det: frame
            .det
            .iter()
            .filter(|d| d.class_name == class_name)
            .cloned()
            .collect(),
    }
}

/// Detections are ranked jointly across frames.
pub fn evaluate_frames(frames: &[Frame], opts: &EvalOptions) -> Result<EvalReport, EvalError> {
    let iou = opts
        .iou_threshold
        .unwrap_or_else(|| default_iou_threshold(&opts.class_name));
    let frames: Vec<Frame> = frames
        .iter()
        .map(|f| filter_class(f, &opts.class_name))
        .collect();
    let results = opts
        .difficulties
        .iter()
        .map(|d| evaluate_difficulty(&frames, iou, opts.protocol, d))
        .collect::<Result<_, _>>()?;
    Ok(EvalReport {
        class_name: opts.class_name.clone(),
        iou_threshold: iou,
        protocol: opts.protocol,
        results,
    })
}

fn read_labels(path: &Path) -> Result<Vec<ObjectLabel>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_label_file(&text).map_err(|source| EvalError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

/// `gt` and `det` are either two label files or two directories of `*.txt`
/// files paired by name; a frame without a detection file has no detections.
pub fn evaluate(gt: &Path, det: &Path, opts: &EvalOptions) -> Result<EvalReport, EvalError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| EvalError::Io { path, source }
    };
    let frames = if gt.is_dir() {
        let mut names: Vec<PathBuf> = std::fs::read_dir(gt)
            .map_err(io(gt))?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()
            .map_err(io(gt))?;
        names.retain(|p| p.extension().is_some_and(|e| e == "txt"));
        names.sort();
        names
            .iter()
            .map(|p| {
                let name = p.file_name().unwrap().to_string_lossy().into_owned();
                let dp = det.join(&name);
                Ok(Frame {
                    gt: read_labels(p)?,
                    det: if dp.exists() {
                        read_labels(&dp)?
                    } else {
                        Vec::new()
                    },
                    name,
                })
            })
            .collect::<Result<Vec<_>, EvalError>>()?
    } else {
        vec![Frame {
            name: gt
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            gt: read_labels(gt)?,
            det: read_labels(det)?,
        }]
    };
    evaluate_frames(&frames, opts)
}

impl EvalReport {
    /// Benchmark / Easy / Moderate / Hard table with detection and
    /// orientation rows.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# protocol={} iou={:.2}",
            self.protocol.name(),
            self.iou_threshold
        );
        let mut header = format!("{:<20}", "Benchmark");
        for r in &self.results {
            let _ = write!(header, " | {:>9}", r.difficulty.name);
        }
        let _ = writeln!(s, "{header}");
        for (what, orientation) in [("Detection", false), ("Orientation", true)] {
            let mut line = format!("{:<20}", format!("{} ({what})", self.class_name));
            for r in &self.results {
                let _ = write!(line, " | {:>7.2} %", if orientation { r.aos } else { r.ap });
            }
            let _ = writeln!(s, "{line}");
        }
        s
    }

    pub fn key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "class={}", self.class_name);
        let _ = writeln!(s, "protocol={}", self.protocol.name());
        let _ = writeln!(s, "iou_threshold={:?}", self.iou_threshold);
        for r in &self.results {
            let k = r.difficulty.name.to_lowercase();
            let _ = writeln!(s, "{k}.ap={:.4}", r.ap);
            let _ = writeln!(s, "{k}.aos={:.4}", r.aos);
            let _ = writeln!(s, "{k}.n_gt={}", r.n_valid_gt);
            let _ = writeln!(s, "{k}.tp={}", r.true_positives);
            let _ = writeln!(s, "{k}.fp={}", r.false_positives);
        }
        s
    }
}

/// Parses a table produced by [`EvalReport::table`]: returns the column names
/// and each `(row label, values)`.
#[allow(clippy::type_complexity)]
pub fn parse_report_table(text: &str) -> Result<(Vec<String>, Vec<(String, Vec<f64>)>), EvalError> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| EvalError::Table("empty table".into()))?;
    let mut cells = header.split('|').map(str::trim);
    if cells.next() != Some("Benchmark") {
        return Err(EvalError::Table("header must start with Benchmark".into()));
    }
    let columns: Vec<String> = cells.map(String::from).collect();
    let rows = lines
        .map(|line| {
            let mut cells = line.split('|').map(str::trim);
            let name = cells.next().unwrap_or_default().to_string();
            let values = cells
                .map(|c| {
                    c.trim_end_matches('%')
                        .trim()
                        .parse::<f64>()
                        .map_err(|_| EvalError::Table(format!("bad value {c:?} in row {name:?}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            if values.len() != columns.len() {
                return Err(EvalError::Table(format!(
                    "row {name:?} has {} values",
                    values.len()
                )));
            }
            Ok((name, values))
        })
        .collect::<Result<_, _>>()?;
    Ok((columns, rows))
}
