//! Diagonal-Gaussian VAE over pooled utterance vectors. Posterior statistics
//! `mu ++ logvar` are the ranking features.

mod loss;
mod model;
mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use loss::{backward, backward_with_noise, draw_noise, elbo_loss, elbo_loss_with_noise, kl_divergence, LossTerms};
pub use model::{
    init_vae, reparameterize, xavier_bound, Dense, LatentSample, LatentStats, VaeHyper, VaeModel, LOGVAR_MAX,
    LOGVAR_MIN,
};
pub use train::{finetune_vae, train_vae, EpochLoss, Optimizer, TrainConfig, TrainOutcome};

pub const MODEL_VERSION: &str = "vae-1";

#[derive(Debug, Error)]
pub enum VaeError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("need at least {needed} training vectors, got {got}")]
    TooFewSamples { got: usize, needed: usize },
    #[error("no {0} vectors supplied")]
    MissingClass(&'static str),
    #[error("invalid VAE config: {0}")]
    InvalidConfig(String),
    #[error("non-finite {0}")]
    NonFinite(String),
    #[error("bad model file: {0}")]
    Format(String),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: String,
    input_dim: usize,
    hyper: VaeHyper,
    norm_mean: Vec<f64>,
    norm_std: Vec<f64>,
    layers: Vec<Dense>,
}

const LAYER_NAMES: [&str; 6] = ["enc1", "enc2", "mu_head", "logvar_head", "dec1", "dec_out"];

impl VaeModel {
    pub fn to_json(&self) -> String {
        let file = ModelFile {
            version: MODEL_VERSION.to_string(),
            input_dim: self.input_dim,
            hyper: self.hyper,
            norm_mean: self.norm_mean.clone(),
            norm_std: self.norm_std.clone(),
            layers: self.layers().into_iter().cloned().collect(),
        };
        serde_json::to_string(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, VaeError> {
        let f: ModelFile = serde_json::from_str(text).map_err(|e| VaeError::Format(e.to_string()))?;
        if f.version != MODEL_VERSION {
            return Err(VaeError::Format(format!("unsupported version {:?}", f.version)));
        }
        let (d, h, z) = (f.input_dim, f.hyper.hidden, f.hyper.latent_dim);
        let shapes = [(h, d), (h, h), (z, h), (z, h), (h, z), (d, h)];
        if f.layers.len() != 6 {
            return Err(VaeError::Format(format!("expected 6 layers, found {}", f.layers.len())));
        }
        for ((layer, name), (rows, cols)) in f.layers.iter().zip(LAYER_NAMES).zip(shapes) {
            if layer.name != name
                || layer.rows != rows
                || layer.cols != cols
                || layer.weights.len() != rows * cols
                || layer.bias.len() != rows
            {
                return Err(VaeError::Format(format!("layer {name} has an inconsistent shape")));
            }
        }
        if f.norm_mean.len() != d || f.norm_std.len() != d || f.norm_std.iter().any(|&s| !(s > 0.0)) {
            return Err(VaeError::Format("bad normalization vectors".into()));
        }
        let mut it = f.layers.into_iter();
        let mut next = || it.next().expect("six layers");
        let model = VaeModel {
            hyper: f.hyper,
            input_dim: d,
            norm_mean: f.norm_mean,
            norm_std: f.norm_std,
            enc1: next(),
            enc2: next(),
            mu_head: next(),
            logvar_head: next(),
            dec1: next(),
            dec_out: next(),
        };
        if !model.is_finite() {
            return Err(VaeError::NonFinite("weights in model file".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, VaeError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| VaeError::Format(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }
}
