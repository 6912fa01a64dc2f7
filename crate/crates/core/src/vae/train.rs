use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::loss::{backward_with_noise, draw_noise};
use super::model::{init_vae, VaeHyper, VaeModel};
use super::VaeError;
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Adam,
    RectifiedAdam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub optimizer: Optimizer,
    /// KL weight used for this run; stored into the model's hyperparameters.
    pub beta: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 150,
            batch_size: 16,
            learning_rate: 1e-3,
            seed: 0,
            optimizer: Optimizer::Adam,
            beta: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), VaeError> {
        let bad = |m: &str| Err(VaeError::InvalidConfig(m.to_string()));
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be positive");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta must be finite and non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub loss: f64,
    pub recon: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: VaeModel,
    /// Sample-weighted mean of the minibatch losses in each epoch.
    pub loss_curve: Vec<EpochLoss>,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    rectified: bool,
}

impl AdamState {
    fn new(n: usize, optimizer: Optimizer) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            rectified: optimizer == Optimizer::RectifiedAdam,
        }
    }

    fn step(&mut self, model: &mut VaeModel, grad: &VaeModel, lr: f64) {
        self.t += 1;
        let b1t = BETA1.powi(self.t);
        let b2t = BETA2.powi(self.t);
        // rectification factor, None while the variance estimate is untrustworthy
        let rect = if self.rectified {
            let rho_inf = 2.0 / (1.0 - BETA2) - 1.0;
            let rho = rho_inf - 2.0 * self.t as f64 * b2t / (1.0 - b2t);
            (rho > 4.0)
                .then(|| ((rho - 4.0) * (rho - 2.0) * rho_inf / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho)).sqrt())
        } else {
            Some(1.0)
        };
        for (((p, g), m), v) in model
            .params_mut()
            .zip(grad.params())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            let m_hat = *m / (1.0 - b1t);
            *p -= match rect {
                Some(r) => lr * r * m_hat / ((*v / (1.0 - b2t)).sqrt() + EPS),
                None => lr * m_hat,
            };
        }
    }
}

/// Minibatch training from the model's current weights. Normalization is left untouched.
fn optimize(mut model: VaeModel, data: &[Vec<f64>], config: &TrainConfig) -> Result<TrainOutcome, VaeError> {
    config.validate()?;
    let n = data.len();
    if n < 2 * config.batch_size {
        return Err(VaeError::TooFewSamples {
            got: n,
            needed: 2 * config.batch_size,
        });
    }
    model.hyper.beta = config.beta;
    let xs: Vec<Vec<f64>> = data.iter().map(|x| model.normalize(x)).collect::<Result<_, _>>()?;
    let mut rng = seeded(config.seed);
    let mut state = AdamState::new(model.n_params(), config.optimizer);
    let mut order: Vec<usize> = (0..n).collect();
    let mut curve = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut acc = EpochLoss {
            loss: 0.0,
            recon: 0.0,
            kl: 0.0,
        };
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<Vec<f64>> = chunk.iter().map(|&i| xs[i].clone()).collect();
            let noise = draw_noise(&mut rng, batch.len(), model.hyper.latent_dim);
            let (terms, grad) = backward_with_noise(&model, &batch, &noise)
                .map_err(|e| VaeError::NonFinite(format!("epoch {epoch}: {e}")))?;
            let w = chunk.len() as f64 / n as f64;
            acc.loss += w * terms.loss;
            acc.recon += w * terms.recon;
            acc.kl += w * terms.kl;
            state.step(&mut model, &grad, config.learning_rate);
        }
        if !model.is_finite() {
            return Err(VaeError::NonFinite(format!("weights after epoch {epoch}")));
        }
        log::debug!(
            "vae epoch {epoch}: loss {:.5} recon {:.5} kl {:.5}",
            acc.loss,
            acc.recon,
            acc.kl
        );
        curve.push(acc);
    }
    Ok(TrainOutcome {
        model,
        loss_curve: curve,
    })
}

/// Pretraining: Xavier init from `config.seed`, normalization fitted to `pooled`.
pub fn train_vae(pooled: &[Vec<f64>], hyper: VaeHyper, config: &TrainConfig) -> Result<TrainOutcome, VaeError> {
    config.validate()?;
    let dim = pooled.first().map(Vec::len).ok_or(VaeError::TooFewSamples {
        got: 0,
        needed: 2 * config.batch_size,
    })?;
    let mut model = init_vae(
        dim,
        VaeHyper {
            beta: config.beta,
            ..hyper
        },
        config.seed,
    )?;
    model.fit_normalization(pooled)?;
    optimize(model, pooled, config)
}

/// Continue training on recorded followed by synthetic vectors. Fresh optimizer
/// state; the normalization fitted at pretraining is kept.
pub fn finetune_vae(
    model: &VaeModel,
    recorded: &[Vec<f64>],
    synthetic: &[Vec<f64>],
    config: &TrainConfig,
) -> Result<TrainOutcome, VaeError> {
    if recorded.is_empty() {
        return Err(VaeError::MissingClass("recorded"));
    }
    if synthetic.is_empty() {
        return Err(VaeError::MissingClass("synthetic"));
    }
    let union: Vec<Vec<f64>> = recorded.iter().chain(synthetic).cloned().collect();
    optimize(model.clone(), &union, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vae::loss::{elbo_loss_with_noise, kl_divergence};
    use rand::Rng;

    fn clusters(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = seeded(seed);
        (0..n)
            .map(|i| {
                let c = if i % 2 == 0 { 3.0 } else { -1.0 };
                (0..dim)
                    .map(|d| c * (d as f64 * 0.3).cos() + 0.5 * rng.random_range(-1.0..1.0) + 10.0)
                    .collect()
            })
            .collect()
    }

    fn small_config() -> TrainConfig {
        TrainConfig {
            epochs: 40,
            batch_size: 16,
            learning_rate: 3e-3,
            seed: 5,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn training_is_deterministic() {
        let data = clusters(80, 10, 1);
        let hyper = VaeHyper {
            latent_dim: 4,
            hidden: 16,
            beta: 1.0,
        };
        let a = train_vae(&data, hyper, &small_config()).unwrap();
        let b = train_vae(&data, hyper, &small_config()).unwrap();
        assert_eq!(a, b);
        let c = train_vae(
            &data,
            hyper,
            &TrainConfig {
                seed: 6,
                ..small_config()
            },
        )
        .unwrap();
        assert_ne!(a.model, c.model);
    }

    #[test]
    fn smoothed_loss_nonincreasing_and_kl_nonnegative() {
        let data = clusters(96, 12, 2);
        let hyper = VaeHyper {
            latent_dim: 4,
            hidden: 16,
            beta: 1.0,
        };
        let out = train_vae(
            &data,
            hyper,
            &TrainConfig {
                epochs: 60,
                ..small_config()
            },
        )
        .unwrap();
        assert!(out.loss_curve.iter().all(|e| e.kl >= 0.0));
        // 5-epoch block means; the ELBO estimate is noisy, so allow 2% upward jitter
        let smooth: Vec<f64> = out
            .loss_curve
            .chunks(5)
            .map(|w| w.iter().map(|e| e.loss).sum::<f64>() / w.len() as f64)
            .collect();
        for w in smooth.windows(2) {
            assert!(w[1] <= 1.02 * w[0], "{smooth:?}");
        }
        assert!(out.loss_curve.last().unwrap().loss < 0.5 * out.loss_curve[0].loss);
    }

    #[test]
    fn overfits_single_sample() {
        let point = vec![vec![0.7, -1.2, 0.4, 2.0, -0.3]];
        let hyper = VaeHyper {
            latent_dim: 2,
            hidden: 8,
            beta: 1.0,
        };
        let mut model = init_vae(5, hyper, 3).unwrap();
        let mut state = AdamState::new(model.n_params(), Optimizer::Adam);
        let mut rng = seeded(4);
        for _ in 0..2000 {
            let noise = draw_noise(&mut rng, 1, 2);
            let (_, g) = backward_with_noise(&model, &point, &noise).unwrap();
            state.step(&mut model, &g, 1e-2);
        }
        let noise = draw_noise(&mut rng, 1, 2);
        let terms = elbo_loss_with_noise(&model, &point, &noise).unwrap();
        assert!(terms.recon < 1e-4, "{terms:?}");
    }

    #[test]
    fn rectified_adam_trains() {
        let data = clusters(64, 8, 3);
        let hyper = VaeHyper {
            latent_dim: 3,
            hidden: 12,
            beta: 1.0,
        };
        let cfg = TrainConfig {
            optimizer: Optimizer::RectifiedAdam,
            ..small_config()
        };
        let out = train_vae(&data, hyper, &cfg).unwrap();
        assert!(out.loss_curve.last().unwrap().loss < out.loss_curve[0].loss);
    }

    #[test]
    fn rectified_first_steps_are_plain_momentum() {
        // rho_t <= 4 for t <= 4 with beta2 = 0.999, so the update is lr * m_hat
        let mut model = init_vae(
            2,
            VaeHyper {
                latent_dim: 1,
                hidden: 1,
                beta: 1.0,
            },
            0,
        )
        .unwrap();
        let before: Vec<f64> = model.params().copied().collect();
        let mut grad = model.zeros_like();
        grad.params_mut().for_each(|g| *g = 2.0);
        let mut state = AdamState::new(model.n_params(), Optimizer::RectifiedAdam);
        state.step(&mut model, &grad, 0.1);
        for (a, b) in before.iter().zip(model.params()) {
            assert!((a - b - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_learning_rate_finetune_keeps_weights() {
        let data = clusters(64, 8, 4);
        let hyper = VaeHyper {
            latent_dim: 3,
            hidden: 12,
            beta: 1.0,
        };
        let pre = train_vae(&data, hyper, &small_config()).unwrap().model;
        let (rec, syn) = data.split_at(32);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 3,
            ..small_config()
        };
        let tuned = finetune_vae(&pre, rec, syn, &cfg).unwrap().model;
        assert_eq!(pre, tuned);
    }

    #[test]
    fn finetune_keeps_normalization() {
        let data = clusters(64, 8, 5);
        let hyper = VaeHyper {
            latent_dim: 3,
            hidden: 12,
            beta: 1.0,
        };
        let pre = train_vae(
            &data[..32],
            hyper,
            &TrainConfig {
                batch_size: 8,
                ..small_config()
            },
        )
        .unwrap()
        .model;
        let tuned = finetune_vae(&pre, &data[..32], &data[32..], &small_config())
            .unwrap()
            .model;
        assert_eq!(pre.norm_mean, tuned.norm_mean);
        assert_eq!(pre.norm_std, tuned.norm_std);
        assert_ne!(pre.enc1, tuned.enc1);
    }

    #[test]
    fn errors() {
        let data = clusters(20, 4, 6);
        let hyper = VaeHyper::default();
        assert!(matches!(
            train_vae(&data, hyper, &TrainConfig::default()),
            Err(VaeError::TooFewSamples { got: 20, needed: 32 })
        ));
        assert!(matches!(
            train_vae(
                &data,
                hyper,
                &TrainConfig {
                    epochs: 0,
                    ..TrainConfig::default()
                }
            ),
            Err(VaeError::InvalidConfig(_))
        ));
        let m = init_vae(4, hyper, 0).unwrap();
        assert!(matches!(
            finetune_vae(&m, &data, &[], &TrainConfig::default()),
            Err(VaeError::MissingClass("synthetic"))
        ));
        assert!(matches!(
            finetune_vae(&m, &[], &data, &TrainConfig::default()),
            Err(VaeError::MissingClass("recorded"))
        ));
        assert!(kl_divergence(&[0.0], &[0.0]) == 0.0);
    }
}
