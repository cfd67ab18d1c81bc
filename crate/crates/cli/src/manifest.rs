//! Run manifest: the provenance of a training run, written next to the
//! checkpoint. It records what the model was trained on (dataset path,
//! range, augmentation), the normalization statistics, the config hash and
//! the code version — everything needed to refuse unsound evaluations and
//! to restate predictions in original units. Deliberately timestamp-free so
//! identical runs produce identical bytes.

use anyhow::{anyhow, bail, Context, Result};
use ndarray::Array1;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use tempora_core::data::NormalizationStats;

pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub code_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub dataset: String,
    pub train_start: usize,
    pub train_end: usize,
    /// Chunk size the dataset was augmented with; 0 when it was used as-is.
    pub chunk: usize,
    /// Frames and dimension after augmentation.
    pub frames: usize,
    pub dim: usize,
    pub norm_mean: Vec<f64>,
    pub norm_std: Vec<f64>,
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn split(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| anyhow!("{key}: not a number: {s:?}"))
        })
        .collect()
}

impl Manifest {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("string write");
        line("code_version", self.code_version.clone());
        line("config_hash", self.config_hash.clone());
        line("seed", self.seed.to_string());
        line("dataset", self.dataset.clone());
        line("train_start", self.train_start.to_string());
        line("train_end", self.train_end.to_string());
        line("chunk", self.chunk.to_string());
        line("frames", self.frames.to_string());
        line("dim", self.dim.to_string());
        line("norm_mean", join(&self.norm_mean));
        line("norm_std", join(&self.norm_std));
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let lin = raw.trim();
            if lin.is_empty() || lin.starts_with('#') {
                continue;
            }
            let (k, v) = lin
                .split_once('=')
                .with_context(|| format!("manifest line {}: expected key = value", no + 1))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let take = |key: &str| -> Result<String> {
            map.get(key)
                .cloned()
                .ok_or_else(|| anyhow!("manifest is missing {key:?}"))
        };
        let num = |key: &str| -> Result<usize> {
            take(key)?
                .parse()
                .map_err(|_| anyhow!("manifest {key} is not a number"))
        };
        let manifest = Self {
            code_version: take("code_version")?,
            config_hash: take("config_hash")?,
            seed: take("seed")?
                .parse()
                .map_err(|_| anyhow!("manifest seed is not a number"))?,
            dataset: take("dataset")?,
            train_start: num("train_start")?,
            train_end: num("train_end")?,
            chunk: num("chunk")?,
            frames: num("frames")?,
            dim: num("dim")?,
            norm_mean: split("norm_mean", &take("norm_mean")?)?,
            norm_std: split("norm_std", &take("norm_std")?)?,
        };
        if manifest.norm_mean.len() != manifest.dim || manifest.norm_std.len() != manifest.dim {
            bail!(
                "manifest normalization statistics have {} / {} entries for dimension {}",
                manifest.norm_mean.len(),
                manifest.norm_std.len(),
                manifest.dim
            );
        }
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())
            .with_context(|| format!("writing manifest {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        Self::parse(&text)
    }

    /// The training-time normalization statistics.
    pub fn stats(&self) -> NormalizationStats {
        NormalizationStats {
            mean: Array1::from_vec(self.norm_mean.clone()),
            std: Array1::from_vec(self.norm_std.clone()),
        }
    }
}
