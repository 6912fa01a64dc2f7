use rand::Rng;
use serde::{Deserialize, Serialize};

use super::objective::dot;
use super::{PairSet, RankError, RankModel};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankTrainConfig {
    pub lambda: f64,
    pub mu_s: f64,
    pub iterations: usize,
    pub batch_pairs: usize,
    pub seed: u64,
    pub projection: bool,
    /// Return the mean of the iterates from the second half of the run instead of the last one.
    pub suffix_averaging: bool,
}

impl Default for RankTrainConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            mu_s: 0.1,
            iterations: 20_000,
            batch_pairs: 16,
            seed: 0,
            projection: true,
            suffix_averaging: true,
        }
    }
}

impl RankTrainConfig {
    pub fn validate(&self) -> Result<(), RankError> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(RankError::InvalidConfig("lambda must be positive".into()));
        }
        if !(self.mu_s >= 0.0 && self.mu_s.is_finite()) {
            return Err(RankError::InvalidConfig("mu_s must be non-negative".into()));
        }
        if self.iterations == 0 || self.batch_pairs == 0 {
            return Err(RankError::InvalidConfig(
                "iterations and batch_pairs must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Stochastic training with step `1/(lambda t)` from `w = 0`.
///
/// Each step draws `batch_pairs` constraints uniformly from `O ∪ S`; a draw is
/// reweighted by `n/|O|` (ordered) or `n/|S|` (similar), `n = |O| + |S|`, so the
/// minibatch gradient is an unbiased estimate of the full gradient.
pub fn train_sgd(pairs: &PairSet, config: &RankTrainConfig) -> Result<RankModel, RankError> {
    config.validate()?;
    if pairs.ordered.is_empty() {
        return Err(RankError::EmptyOrderedSet);
    }
    let (n_o, n_s) = (pairs.ordered.len(), pairs.similar.len());
    let n = n_o + n_s;
    let w_o = n as f64 / n_o as f64;
    let w_s = if n_s > 0 {
        config.mu_s * n as f64 / n_s as f64
    } else {
        0.0
    };
    let lambda = config.lambda;
    let radius = 1.0 / lambda.sqrt();
    let dim = pairs.dim();
    let mut w = vec![0.0; dim];
    let mut grad = vec![0.0; dim];
    let mut rng = seeded(config.seed);
    let inv_b = 1.0 / config.batch_pairs as f64;
    let avg_start = config.iterations / 2 + 1;
    let mut avg = vec![0.0; dim];
    for t in 1..=config.iterations {
        for (g, v) in grad.iter_mut().zip(&w) {
            *g = lambda * v;
        }
        for _ in 0..config.batch_pairs {
            let k = rng.random_range(0..n);
            let (pair, coef) = if k < n_o {
                let d = pairs.diff(pairs.ordered[k]);
                let slack = (1.0 - dot(&w, &d)).max(0.0);
                (d, -2.0 * w_o * slack)
            } else {
                let d = pairs.diff(pairs.similar[k - n_o]);
                let s = dot(&w, &d);
                (d, 2.0 * w_s * s)
            };
            if coef != 0.0 {
                for (g, x) in grad.iter_mut().zip(&pair) {
                    *g += inv_b * coef * x;
                }
            }
        }
        let eta = 1.0 / (lambda * t as f64);
        for (v, g) in w.iter_mut().zip(&grad) {
            *v -= eta * g;
        }
        if config.projection {
            let norm = dot(&w, &w).sqrt();
            if norm > radius {
                let s = radius / norm;
                w.iter_mut().for_each(|v| *v *= s);
            }
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(RankError::NonFinite);
        }
        if t >= avg_start {
            let k = (t - avg_start + 1) as f64;
            for (a, v) in avg.iter_mut().zip(&w) {
                *a += (v - *a) / k;
            }
        }
    }
    let w = if config.suffix_averaging { avg } else { w };
    Ok(RankModel::new(w, config.lambda, config.mu_s))
}
