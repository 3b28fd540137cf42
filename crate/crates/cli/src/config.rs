//! The TOML run configuration. Every value is optional; flags given on the
//! command line win over the file, and the file wins over built-in defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use cartoseg::evaluation::{ClassSet, Normalization};
use cartoseg::inference::Upsample;
use cartoseg::synth::GenerationConfig;

use crate::Invalid;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub log_level: Option<String>,
    pub jobs: Option<usize>,
    /// Relative output paths resolve against this directory.
    pub out_dir: Option<PathBuf>,
    pub synth: SynthSection,
    pub infer: InferSection,
    pub eval: EvalSection,
    pub bias: BiasSection,
    pub colorfit: ColorfitSection,
    pub fixtures: FixturesSection,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub features: Option<PathBuf>,
    pub colors: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub count: Option<u64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub generation: Option<GenerationConfig>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferSection {
    pub input: Option<PathBuf>,
    pub backend: Option<String>,
    pub scales: Option<Vec<f64>>,
    pub patch: Option<u32>,
    pub overlap: Option<u32>,
    pub upsample: Option<Upsample>,
    pub out: Option<PathBuf>,
    pub logits: Option<PathBuf>,
    pub timeout_ms: Option<u64>,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub pred: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub strategy: Option<String>,
    pub classes: Option<ClassSet>,
    pub report: Option<PathBuf>,
    pub confusion: Option<PathBuf>,
    pub normalize: Option<Normalization>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BiasSection {
    pub metrics: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub min_count: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColorfitSection {
    pub images: Option<PathBuf>,
    pub masks: Option<PathBuf>,
    pub components: Option<usize>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub samples_per_class: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixturesSection {
    pub regions: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Invalid(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Invalid(format!("config {}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// Joins relative output paths onto `out_dir`.
    pub fn output(&self, p: PathBuf) -> PathBuf {
        match &self.out_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p,
        }
    }
}

/// First present value, or a validation error naming the flag.
pub fn required<T>(flag: &str, values: impl IntoIterator<Item = Option<T>>) -> anyhow::Result<T> {
    values
        .into_iter()
        .flatten()
        .next()
        .ok_or_else(|| Invalid(format!("missing required value --{flag} (flag or config file)")).into())
}

pub fn existing(path: PathBuf, what: &str) -> anyhow::Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Invalid(format!("{what} {} does not exist", path.display())).into())
    }
}
