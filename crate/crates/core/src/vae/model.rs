use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::VaeError;
use crate::rng::seeded;

/// log-variance range enforced in every forward pass.
pub const LOGVAR_MIN: f64 = -10.0;
pub const LOGVAR_MAX: f64 = 10.0;
const STD_FLOOR: f64 = 1e-6;

/// Fully connected layer, `weights` is `rows x cols` row-major (`rows` outputs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(name: &str, rows: usize, cols: usize) -> Self {
        Self {
            name: name.to_string(),
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    fn xavier(name: &str, rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = xavier_bound(cols, rows);
        let mut layer = Self::zeros(name, rows, cols);
        for w in &mut layer.weights {
            *w = rng.random_range(-bound..=bound);
        }
        layer
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.weights
            .chunks_exact(self.cols)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }

    /// `W^T g`.
    pub fn backward_input(&self, grad_out: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (row, g) in self.weights.chunks_exact(self.cols).zip(grad_out) {
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * g;
            }
        }
        out
    }

    /// Accumulate `g x^T` into this (gradient) layer.
    pub fn accumulate(&mut self, grad_out: &[f64], input: &[f64]) {
        for ((row, b), g) in self
            .weights
            .chunks_exact_mut(self.cols)
            .zip(&mut self.bias)
            .zip(grad_out)
        {
            *b += g;
            for (w, x) in row.iter_mut().zip(input) {
                *w += g * x;
            }
        }
    }

    pub fn n_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(&self.bias)
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(&mut self.bias)
    }
}

pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VaeHyper {
    pub latent_dim: usize,
    pub hidden: usize,
    /// KL weight.
    pub beta: f64,
}

impl Default for VaeHyper {
    fn default() -> Self {
        Self {
            latent_dim: 16,
            hidden: 64,
            beta: 1.0,
        }
    }
}

/// Diagonal-Gaussian VAE over pooled utterance vectors.
///
/// Encoder: `D -> H -> H` (tanh) feeding linear `mu` and `logvar` heads.
/// Decoder: `Z -> H` (tanh) `-> D` (linear). Inputs are standardized with
/// `norm_mean`/`norm_std` before the first layer.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeModel {
    pub hyper: VaeHyper,
    pub input_dim: usize,
    pub norm_mean: Vec<f64>,
    pub norm_std: Vec<f64>,
    pub enc1: Dense,
    pub enc2: Dense,
    pub mu_head: Dense,
    pub logvar_head: Dense,
    pub dec1: Dense,
    pub dec_out: Dense,
}

/// Posterior statistics of one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentStats {
    pub id: String,
    pub mu: Vec<f64>,
    pub logvar: Vec<f64>,
}

impl LatentStats {
    /// `mu ++ logvar`, the ranking feature vector.
    pub fn flattened(&self) -> Vec<f64> {
        self.mu.iter().chain(&self.logvar).copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentSample {
    pub z: Vec<f64>,
}

/// Intermediate activations of one forward pass, kept for backprop.
#[derive(Debug, Clone)]
pub(crate) struct ForwardCache {
    pub x: Vec<f64>,
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub mu: Vec<f64>,
    pub logvar: Vec<f64>,
    /// Whether logvar was strictly inside the clamp range (gradient passes).
    pub logvar_free: Vec<bool>,
    pub eps: Vec<f64>,
    pub z: Vec<f64>,
    pub h3: Vec<f64>,
    pub y: Vec<f64>,
}

fn tanh_all(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(f64::tanh).collect()
}

impl VaeModel {
    pub fn layers(&self) -> [&Dense; 6] {
        [
            &self.enc1,
            &self.enc2,
            &self.mu_head,
            &self.logvar_head,
            &self.dec1,
            &self.dec_out,
        ]
    }

    pub fn layers_mut(&mut self) -> [&mut Dense; 6] {
        [
            &mut self.enc1,
            &mut self.enc2,
            &mut self.mu_head,
            &mut self.logvar_head,
            &mut self.dec1,
            &mut self.dec_out,
        ]
    }

    pub fn n_params(&self) -> usize {
        self.layers().iter().map(|l| l.n_params()).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers().into_iter().flat_map(|l| l.params())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers_mut().into_iter().flat_map(|l| l.params_mut())
    }

    /// Same architecture with every weight and bias zero (gradient accumulator).
    pub fn zeros_like(&self) -> VaeModel {
        let z = |l: &Dense| Dense::zeros(&l.name, l.rows, l.cols);
        VaeModel {
            hyper: self.hyper,
            input_dim: self.input_dim,
            norm_mean: self.norm_mean.clone(),
            norm_std: self.norm_std.clone(),
            enc1: z(&self.enc1),
            enc2: z(&self.enc2),
            mu_head: z(&self.mu_head),
            logvar_head: z(&self.logvar_head),
            dec1: z(&self.dec1),
            dec_out: z(&self.dec_out),
        }
    }

    fn check_dim(&self, got: usize, expected: usize) -> Result<(), VaeError> {
        if got == expected {
            Ok(())
        } else {
            Err(VaeError::DimMismatch { expected, got })
        }
    }

    /// Set input standardization; std entries are floored at 1e-6.
    pub fn set_normalization(&mut self, mean: Vec<f64>, std: Vec<f64>) -> Result<(), VaeError> {
        self.check_dim(mean.len(), self.input_dim)?;
        self.check_dim(std.len(), self.input_dim)?;
        self.norm_mean = mean;
        self.norm_std = std.into_iter().map(|s| s.max(STD_FLOOR)).collect();
        Ok(())
    }

    /// Fit the standardization to a set of raw pooled vectors.
    pub fn fit_normalization(&mut self, data: &[Vec<f64>]) -> Result<(), VaeError> {
        let d = self.input_dim;
        let n = data.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for x in data {
            self.check_dim(x.len(), d)?;
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for x in data {
            for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        self.set_normalization(mean, var.into_iter().map(f64::sqrt).collect())
    }

    pub fn normalize(&self, raw: &[f64]) -> Result<Vec<f64>, VaeError> {
        self.check_dim(raw.len(), self.input_dim)?;
        Ok(raw
            .iter()
            .zip(&self.norm_mean)
            .zip(&self.norm_std)
            .map(|((x, m), s)| (x - m) / s)
            .collect())
    }

    /// Posterior `(mu, logvar)` for an already normalized input.
    fn posterior(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<bool>) {
        let h1 = tanh_all(self.enc1.forward(x));
        let h2 = tanh_all(self.enc2.forward(&h1));
        let mu = self.mu_head.forward(&h2);
        let raw = self.logvar_head.forward(&h2);
        let free = raw.iter().map(|&v| v > LOGVAR_MIN && v < LOGVAR_MAX).collect();
        let logvar = raw.into_iter().map(|v| v.clamp(LOGVAR_MIN, LOGVAR_MAX)).collect();
        (h1, h2, mu, logvar, free)
    }

    pub(crate) fn forward_normalized(&self, x: &[f64], eps: &[f64]) -> ForwardCache {
        let (h1, h2, mu, logvar, logvar_free) = self.posterior(x);
        let z: Vec<f64> = mu
            .iter()
            .zip(&logvar)
            .zip(eps)
            .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
            .collect();
        let h3 = tanh_all(self.dec1.forward(&z));
        let y = self.dec_out.forward(&h3);
        ForwardCache {
            x: x.to_vec(),
            h1,
            h2,
            mu,
            logvar,
            logvar_free,
            eps: eps.to_vec(),
            z,
            h3,
            y,
        }
    }

    /// Deterministic posterior statistics of a raw pooled vector.
    pub fn encode(&self, id: &str, pooled: &[f64]) -> Result<LatentStats, VaeError> {
        let x = self.normalize(pooled)?;
        let (_, _, mu, logvar, _) = self.posterior(&x);
        Ok(LatentStats {
            id: id.to_string(),
            mu,
            logvar,
        })
    }

    /// Decoder output in normalized input space.
    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>, VaeError> {
        self.check_dim(z.len(), self.hyper.latent_dim)?;
        Ok(self.dec_out.forward(&tanh_all(self.dec1.forward(z))))
    }

    /// `mu ++ logvar` of a raw pooled vector.
    pub fn latent_features(&self, pooled: &[f64]) -> Result<Vec<f64>, VaeError> {
        Ok(self.encode("", pooled)?.flattened())
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|v| v.is_finite())
    }
}

/// Xavier-uniform weights, zero biases, identity normalization.
pub fn init_vae(input_dim: usize, hyper: VaeHyper, seed: u64) -> Result<VaeModel, VaeError> {
    if input_dim == 0 || hyper.latent_dim == 0 || hyper.hidden == 0 {
        return Err(VaeError::InvalidConfig("dimensions must be positive".into()));
    }
    if !(hyper.beta >= 0.0 && hyper.beta.is_finite()) {
        return Err(VaeError::InvalidConfig(
            "beta must be a finite non-negative number".into(),
        ));
    }
    let (d, h, z) = (input_dim, hyper.hidden, hyper.latent_dim);
    let mut rng = seeded(seed);
    Ok(VaeModel {
        hyper,
        input_dim,
        norm_mean: vec![0.0; d],
        norm_std: vec![1.0; d],
        enc1: Dense::xavier("enc1", h, d, &mut rng),
        enc2: Dense::xavier("enc2", h, h, &mut rng),
        mu_head: Dense::xavier("mu_head", z, h, &mut rng),
        logvar_head: Dense::xavier("logvar_head", z, h, &mut rng),
        dec1: Dense::xavier("dec1", h, z, &mut rng),
        dec_out: Dense::xavier("dec_out", d, h, &mut rng),
    })
}

/// `z = mu + exp(logvar / 2) * eps`, `eps ~ N(0, I)`.
pub fn reparameterize(stats: &LatentStats, rng: &mut impl Rng) -> LatentSample {
    LatentSample {
        z: stats
            .mu
            .iter()
            .zip(&stats.logvar)
            .map(|(m, lv)| {
                let e: f64 = rng.sample(StandardNormal);
                m + (0.5 * lv).exp() * e
            })
            .collect(),
    }
}
