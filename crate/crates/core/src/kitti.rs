//! KITTI object label, result and calibration files.
//!
//! Label lines carry 15 whitespace-separated fields (ground truth) or 16
//! (detector results, with a trailing score):
//!
//! ```text
//! type truncated occluded alpha left top right bottom h w l x y z rotation_y [score]
//! ```
//!
//! Numbers are written with six decimals. Angles are wrapped into `(-pi, pi]`
//! on parse, except values that only leave that interval by the six-decimal
//! rounding slop (|x| <= pi + 1e-6), which are kept verbatim so a written file
//! reads back and rewrites byte-identically.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt::Write as _;

use thiserror::Error;

use crate::geometry::wrap_angle;

pub const DONT_CARE: &str = "DontCare";

const GT_FIELDS: usize = 15;
const RESULT_FIELDS: usize = 16;
const ANGLE_SLOP: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KittiError {
    #[error("line {line}: expected 15 or 16 fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}, field {field}: {reason}")]
    BadField {
        line: usize,
        field: usize,
        reason: String,
    },
    #[error("line {line}: has {found} fields but earlier lines have {expected}")]
    MixedFieldCounts {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("calibration has no P2 line")]
    MissingP2,
    #[error("calibration P2 has {0} values, expected 12")]
    P2ValueCount(usize),
    #[error("calibration P2 value {index} is invalid: {text}")]
    P2Value { index: usize, text: String },
    #[error("calibration P2 has non-positive focal length")]
    BadFocal,
    #[error("no labels of class {0}")]
    MissingClass(String),
}

/// Box extents in meters. An axis-ordered `D = [d_x, d_y, d_z]` maps to
/// `(length, height, width)` respectively.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dims {
    pub height: f64,
    pub width: f64,
    pub length: f64,
}

impl Dims {
    pub fn new(height: f64, width: f64, length: f64) -> Self {
        Self {
            height,
            width,
            length,
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.height, self.width, self.length]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

/// Pixel rectangle, `(left, top, right, bottom)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox2D {
    pub left: f64,
    pub top: f64,
    pub right: f64,
    pub bottom: f64,
}

impl BBox2D {
    pub fn new(left: f64, top: f64, right: f64, bottom: f64) -> Self {
        Self {
            left,
            top,
            right,
            bottom,
        }
    }

    pub fn width(&self) -> f64 {
        self.right - self.left
    }

    pub fn height(&self) -> f64 {
        self.bottom - self.top
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.left + self.right) / 2.0,
            (self.top + self.bottom) / 2.0,
        )
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn iou(&self, other: &BBox2D) -> f64 {
        let iw = self.right.min(other.right) - self.left.max(other.left);
        let ih = self.bottom.min(other.bottom) - self.top.max(other.top);
        if iw <= 0.0 || ih <= 0.0 {
            return 0.0;
        }
        let inter = iw * ih;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectLabel {
    pub class_name: String,
    pub truncation: f64,
    pub occlusion: i32,
    pub alpha: f64,
    pub bbox: BBox2D,
    pub dims: Dims,
    /// Bottom-face center in the camera frame.
    pub location: [f64; 3],
    pub rotation_y: f64,
    pub score: Option<f64>,
}

impl ObjectLabel {
    pub fn is_dont_care(&self) -> bool {
        self.class_name == DONT_CARE
    }
}

/// Pinhole parameters from a KITTI `P2` projection matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fu: f64,
    pub fv: f64,
    pub cu: f64,
    pub cv: f64,
    pub full_p: [[f64; 4]; 3],
}

impl CameraIntrinsics {
    pub fn from_projection(full_p: [[f64; 4]; 3]) -> Self {
        Self {
            fu: full_p[0][0],
            fv: full_p[1][1],
            cu: full_p[0][2],
            cv: full_p[1][2],
            full_p,
        }
    }

    /// Zero-baseline camera with the given focal lengths and principal point.
    pub fn from_focal(fu: f64, fv: f64, cu: f64, cv: f64) -> Self {
        Self::from_projection([[fu, 0.0, cu, 0.0], [0.0, fv, cv, 0.0], [0.0, 0.0, 1.0, 0.0]])
    }
}

fn parse_num(tok: &str, line: usize, field: usize) -> Result<f64, KittiError> {
    let v: f64 = tok.parse().map_err(|_| KittiError::BadField {
        line,
        field,
        reason: format!("not a number: {tok:?}"),
    })?;
    if !v.is_finite() {
        return Err(KittiError::BadField {
            line,
            field,
            reason: format!("non-finite value {tok:?}"),
        });
    }
    Ok(v)
}

fn read_angle(v: f64) -> f64 {
    if v.abs() <= PI + ANGLE_SLOP {
        v
    } else {
        wrap_angle(v)
    }
}

fn parse_label_line(tokens: &[&str], line: usize) -> Result<ObjectLabel, KittiError> {
    let num = |i: usize| parse_num(tokens[i], line, i);
    let class_name = tokens[0].to_string();
    let dont_care = class_name == DONT_CARE;
    let occlusion = tokens[2]
        .parse::<f64>()
        .ok()
        .filter(|v| v.fract() == 0.0)
        .ok_or_else(|| KittiError::BadField {
            line,
            field: 2,
            reason: format!("occlusion is not an integer: {:?}", tokens[2]),
        })? as i32;
    if !(0..=3).contains(&occlusion) && !dont_care {
        return Err(KittiError::BadField {
            line,
            field: 2,
            reason: format!("occlusion {occlusion} outside 0..=3"),
        });
    }
    let bbox = BBox2D::new(num(4)?, num(5)?, num(6)?, num(7)?);
    if !dont_care && !(bbox.left < bbox.right && bbox.top < bbox.bottom) {
        return Err(KittiError::BadField {
            line,
            field: 4,
            reason: "bounding box is empty or inverted".into(),
        });
    }
    let score = if tokens.len() == RESULT_FIELDS {
        Some(num(15)?)
    } else {
        None
    };
    Ok(ObjectLabel {
        class_name,
        truncation: num(1)?,
        occlusion,
        alpha: read_angle(num(3)?),
        bbox,
        dims: Dims::new(num(8)?, num(9)?, num(10)?),
        location: [num(11)?, num(12)?, num(13)?],
        rotation_y: read_angle(num(14)?),
        score,
    })
}

/// Parses a KITTI label or result file. Line numbers in errors are 1-based.
pub fn parse_label_file(text: &str) -> Result<Vec<ObjectLabel>, KittiError> {
    let mut out = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() != GT_FIELDS && tokens.len() != RESULT_FIELDS {
            return Err(KittiError::FieldCount {
                line,
                found: tokens.len(),
            });
        }
        match width {
            Some(w) if w != tokens.len() => {
                return Err(KittiError::MixedFieldCounts {
                    line,
                    expected: w,
                    found: tokens.len(),
                })
            }
            _ => width = Some(tokens.len()),
        }
        out.push(parse_label_line(&tokens, line)?);
    }
    Ok(out)
}

pub fn serialize_label(label: &ObjectLabel, out: &mut String) {
    let b = &label.bbox;
    let d = &label.dims;
    let [x, y, z] = label.location;
    let _ = write!(
        out,
        "{} {:.6} {} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6}",
        label.class_name,
        label.truncation,
        label.occlusion,
        label.alpha,
        b.left,
        b.top,
        b.right,
        b.bottom,
        d.height,
        d.width,
        d.length,
        x,
        y,
        z,
        label.rotation_y
    );
    if let Some(s) = label.score {
        let _ = write!(out, " {s:.6}");
    }
    out.push('\n');
}

pub fn serialize_label_file(labels: &[ObjectLabel]) -> String {
    let mut out = String::new();
    for l in labels {
        serialize_label(l, &mut out);
    }
    out
}

/// Reads the `P2:` camera matrix from a KITTI calibration file.
pub fn parse_calib_file(text: &str) -> Result<CameraIntrinsics, KittiError> {
    let rest = text
        .lines()
        .find_map(|l| l.trim_start().strip_prefix("P2:"))
        .ok_or(KittiError::MissingP2)?;
    let tokens: Vec<&str> = rest.split_whitespace().collect();
    if tokens.len() != 12 {
        return Err(KittiError::P2ValueCount(tokens.len()));
    }
    let mut p = [[0.0; 4]; 3];
    for (i, tok) in tokens.iter().enumerate() {
        let v: f64 = tok
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| KittiError::P2Value {
                index: i,
                text: tok.to_string(),
            })?;
        p[i / 4][i % 4] = v;
    }
    let k = CameraIntrinsics::from_projection(p);
    if k.fu <= 0.0 || k.fv <= 0.0 {
        return Err(KittiError::BadFocal);
    }
    Ok(k)
}

/// Writes a calibration file holding only `P2`, in shortest round-trip form.
pub fn serialize_calib_file(k: &CameraIntrinsics) -> String {
    let vals: Vec<String> = k
        .full_p
        .iter()
        .flatten()
        .map(|v| format!("{v:?}"))
        .collect();
    format!("P2: {}\n", vals.join(" "))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassStats {
    pub mean: Dims,
    pub count: usize,
}

/// Per-class mean dimensions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DimsStats {
    pub classes: BTreeMap<String, ClassStats>,
}

impl DimsStats {
    pub fn mean(&self, class_name: &str) -> Option<Dims> {
        self.classes.get(class_name).map(|c| c.mean)
    }

    /// Plain `key=value` form: `<class>.count=N` and `<class>.mean=h w l`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, c) in &self.classes {
            let m = c.mean;
            let _ = writeln!(out, "{name}.count={}", c.count);
            let _ = writeln!(
                out,
                "{name}.mean={:?} {:?} {:?}",
                m.height, m.width, m.length
            );
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, KittiError> {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        let mut means: BTreeMap<String, Dims> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let raw = raw.trim();
            if raw.is_empty() || raw.starts_with('#') {
                continue;
            }
            let bad = |reason: &str| KittiError::BadField {
                line,
                field: 0,
                reason: reason.to_string(),
            };
            let (key, value) = raw
                .split_once('=')
                .ok_or_else(|| bad("expected key=value"))?;
            let (class, what) = key
                .rsplit_once('.')
                .ok_or_else(|| bad("expected <class>.<field>"))?;
            match what {
                "count" => {
                    let n = value
                        .trim()
                        .parse()
                        .map_err(|_| bad("count is not an integer"))?;
                    counts.insert(class.to_string(), n);
                }
                "mean" => {
                    let v: Vec<f64> = value
                        .split_whitespace()
                        .map(|t| parse_num(t, line, 1))
                        .collect::<Result<_, _>>()?;
                    if v.len() != 3 {
                        return Err(bad("mean needs three values"));
                    }
                    means.insert(class.to_string(), Dims::new(v[0], v[1], v[2]));
                }
                _ => return Err(bad("unknown field")),
            }
        }
        let classes = means
            .into_iter()
            .map(|(name, mean)| {
                let count = counts.get(&name).copied().unwrap_or(1);
                (name, ClassStats { mean, count })
            })
            .collect();
        Ok(Self { classes })
    }
}

/// Mean `(h, w, l)` for each requested class, skipping `DontCare`.
pub fn compute_dims_stats(
    labels: &[ObjectLabel],
    classes: &BTreeSet<String>,
) -> Result<DimsStats, KittiError> {
    let mut acc: BTreeMap<&str, ([f64; 3], usize)> = BTreeMap::new();
    for l in labels.iter().filter(|l| !l.is_dont_care()) {
        if !classes.contains(&l.class_name) {
            continue;
        }
        let e = acc.entry(l.class_name.as_str()).or_insert(([0.0; 3], 0));
        for (s, v) in e.0.iter_mut().zip(l.dims.to_array()) {
            *s += v;
        }
        e.1 += 1;
    }
    let mut stats = DimsStats::default();
    for name in classes {
        let (sum, count) = acc
            .get(name.as_str())
            .ok_or_else(|| KittiError::MissingClass(name.clone()))?;
        let n = *count as f64;
        stats.classes.insert(
            name.clone(),
            ClassStats {
                mean: Dims::from_array(sum.map(|s| s / n)),
                count: *count,
            },
        );
    }
    Ok(stats)
}
