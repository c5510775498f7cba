//! `MLW1` weight files.
//!
//! ```text
//! "MLW1"                       4 bytes
//! metadata length N            u32 little-endian
//! metadata                     N bytes UTF-8, one key=value per line
//! parameters                   f32 little-endian, storage order of
//!                              HeadParams::tensors()
//! ```
//!
//! Metadata keys: `feature_dim`, `hidden_dim`, `n_bins`, `overlap_fraction`,
//! `seed`, and `dims_mean.<class>=h w l` per class (sorted by class name).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::head::{HeadConfig, HeadParams};
use super::NetError;
use crate::kitti::Dims;
use crate::multibin::{make_layout, BinLayout};

pub const WEIGHT_MAGIC: &[u8; 4] = b"MLW1";

#[derive(Debug, Clone, PartialEq)]
pub struct WeightFile {
    pub params: HeadParams,
    pub layout: BinLayout,
    pub dims_mean: BTreeMap<String, Dims>,
}

fn bad(msg: impl Into<String>) -> NetError {
    NetError::WeightFile(msg.into())
}

impl WeightFile {
    pub fn metadata(&self) -> String {
        let c = &self.params.config;
        let mut s = String::new();
        let _ = writeln!(s, "feature_dim={}", c.feature_dim);
        let _ = writeln!(s, "hidden_dim={}", c.hidden_dim);
        let _ = writeln!(s, "n_bins={}", c.n_bins);
        let _ = writeln!(s, "overlap_fraction={:?}", self.layout.overlap_fraction());
        let _ = writeln!(s, "seed={}", c.seed);
        for (name, d) in &self.dims_mean {
            let _ = writeln!(
                s,
                "dims_mean.{name}={:?} {:?} {:?}",
                d.height, d.width, d.length
            );
        }
        s
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = self.metadata();
        let mut out = Vec::with_capacity(8 + meta.len() + 4 * self.params.param_count());
        out.extend_from_slice(WEIGHT_MAGIC);
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(meta.as_bytes());
        for t in self.params.tensors() {
            for &v in t {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NetError> {
        if bytes.len() < 8 || &bytes[..4] != WEIGHT_MAGIC {
            return Err(bad("missing MLW1 magic"));
        }
        let meta_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let meta_end = 8usize
            .checked_add(meta_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| bad("truncated metadata"))?;
        let meta =
            std::str::from_utf8(&bytes[8..meta_end]).map_err(|_| bad("metadata is not UTF-8"))?;

        let mut kv: BTreeMap<&str, &str> = BTreeMap::new();
        let mut dims_mean = BTreeMap::new();
        for line in meta.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("bad metadata line {line:?}")))?;
            if let Some(class) = k.strip_prefix("dims_mean.") {
                let vals: Vec<f64> = v
                    .split_whitespace()
                    .map(|t| t.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad(format!("bad dims_mean for {class}")))?;
                let [h, w, l] = vals[..] else {
                    return Err(bad(format!("dims_mean for {class} needs 3 values")));
                };
                dims_mean.insert(class.to_string(), Dims::new(h, w, l));
            } else {
                kv.insert(k, v);
            }
        }
        let field = |k: &str| {
            kv.get(k)
                .copied()
                .ok_or_else(|| bad(format!("missing metadata key {k}")))
        };
        let int = |k: &str| -> Result<usize, NetError> {
            field(k)?.parse().map_err(|_| bad(format!("bad {k}")))
        };
        let config = HeadConfig {
            feature_dim: int("feature_dim")?,
            hidden_dim: int("hidden_dim")?,
            n_bins: int("n_bins")?,
            seed: field("seed")?.parse().map_err(|_| bad("bad seed"))?,
        };
        config.validate()?;
        let overlap: f64 = field("overlap_fraction")?
            .parse()
            .map_err(|_| bad("bad overlap_fraction"))?;
        let layout = make_layout(config.n_bins, overlap).map_err(|e| bad(e.to_string()))?;

        let mut params = HeadParams::zeros(config);
        let body = &bytes[meta_end..];
        if body.len() != 4 * params.param_count() {
            return Err(bad(format!(
                "expected {} parameter bytes, found {}",
                4 * params.param_count(),
                body.len()
            )));
        }
        let flat: Vec<f64> = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        params.load_flat(&flat);
        Ok(Self {
            params,
            layout,
            dims_mean,
        })
    }
}
