//! Run configuration: one JSON file, schema `cfg-1`.
//!
//! Relative paths are resolved against the directory holding the config file.
//! Stage seeds are derived from the global `seed`; seed fields inside the
//! stage sections are overwritten when the config is resolved.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::SimConfig;
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::projection::TsneConfig;
use crate::rank::{PairConfig, RankTrainConfig};
use crate::rng::{stage, stage_seed};
use crate::selection::SelectionPolicy;
use crate::vae::{TrainConfig, VaeHyper};

pub const SCHEMA: &str = "cfg-1";

fn schema() -> String {
    SCHEMA.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub manifest: PathBuf,
    pub work_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            manifest: PathBuf::from("corpus/manifest.jsonl"),
            work_dir: PathBuf::from("run"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "schema")]
    pub schema: String,
    pub paths: Paths,
    pub seed: u64,
    pub features: FeatureConfig,
    pub vae: VaeHyper,
    pub pretrain: TrainConfig,
    pub finetune: TrainConfig,
    pub pairs: PairConfig,
    pub rank: RankTrainConfig,
    pub selection: SelectionPolicy,
    pub histogram_bins: usize,
    /// Size of each of the high and low originality groups, as a fraction of the synthetic items.
    pub extremes_fraction: f64,
    pub tsne: TsneConfig,
    /// Used by `simulate`; ignored by the other stages.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimConfig>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            schema: schema(),
            paths: Paths::default(),
            seed: 0,
            features: FeatureConfig::default(),
            vae: VaeHyper::default(),
            pretrain: TrainConfig::default(),
            finetune: TrainConfig::default(),
            pairs: PairConfig::default(),
            rank: RankTrainConfig::default(),
            selection: SelectionPolicy::default(),
            histogram_bins: 20,
            extremes_fraction: 0.1,
            tsne: TsneConfig::default(),
            simulation: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: PipelineConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Parse, validate and resolve relative paths against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.paths.manifest = base.join(&config.paths.manifest);
        config.paths.work_dir = base.join(&config.paths.work_dir);
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks that do not depend on the corpus. Perplexity against the item
    /// count is checked when the projection runs.
    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            return Err(Error::Config(format!(
                "unsupported schema {:?}, expected {SCHEMA:?}",
                self.schema
            )));
        }
        if self.histogram_bins < 2 {
            return Err(Error::Config(format!(
                "histogram_bins must be at least 2, got {}",
                self.histogram_bins
            )));
        }
        if !(self.extremes_fraction > 0.0 && self.extremes_fraction <= 0.5) {
            return Err(Error::Config(format!(
                "extremes_fraction {} outside (0, 0.5]",
                self.extremes_fraction
            )));
        }
        let t = &self.tsne;
        if !(t.perplexity > 1.0 && t.learning_rate > 0.0 && t.early_exaggeration >= 1.0) || t.iterations == 0 {
            return Err(Error::Config(
                "tsne needs perplexity > 1, learning_rate > 0, early_exaggeration >= 1 and iterations > 0".into(),
            ));
        }
        if self.vae.latent_dim == 0 || self.vae.hidden == 0 {
            return Err(Error::Config("vae latent_dim and hidden must be positive".into()));
        }
        self.pretrain.validate()?;
        self.finetune.validate()?;
        self.rank.validate()?;
        self.selection.validate()?;
        if let Some(sim) = &self.simulation {
            sim.validate()?;
        }
        Ok(())
    }

    /// Copy with every stage seed derived from the global seed.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.pretrain.seed = stage_seed(self.seed, stage::PRETRAIN);
        c.finetune.seed = stage_seed(self.seed, stage::FINETUNE);
        c.rank.seed = stage_seed(self.seed, stage::RANK);
        c.tsne.seed = stage_seed(self.seed, stage::TSNE);
        c
    }

    pub fn pair_seed(&self) -> u64 {
        stage_seed(self.seed, stage::PAIRS)
    }

    pub fn simulate_seed(&self) -> u64 {
        stage_seed(self.seed, stage::SIMULATE)
    }

    /// sha256 over the canonical JSON of the resolved config without `paths`,
    /// so moving a run directory does not change the hash.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self.resolved()).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("paths");
        }
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }
}
