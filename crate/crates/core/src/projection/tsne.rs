use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pca::{center_and_cov, top_eigenpairs};
use super::{Projection2D, ProjectionError, ProjectionMethod};
use crate::rng::seeded;

const SEARCH_STEPS: usize = 50;
const ENTROPY_TOL: f64 = 1e-4;
const MOMENTUM_SWITCH: usize = 250;
const MIN_GAIN: f64 = 0.01;
const P_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 15.0,
            iterations: 1000,
            learning_rate: 100.0,
            early_exaggeration: 4.0,
            exaggeration_iters: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsneOutcome {
    pub projection: Projection2D,
    /// KL(P || Q) of the initial embedding.
    pub first_kl: f64,
    /// Points whose bandwidth search ended outside the entropy tolerance.
    pub entropy_misses: usize,
}

/// Conditional probabilities of row `i` for precision `beta`, and their entropy in bits.
fn row_probs(d2: &[f64], i: usize, beta: f64) -> (Vec<f64>, f64) {
    let dmin = d2
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &v)| v)
        .fold(f64::INFINITY, f64::min);
    let mut p: Vec<f64> = d2
        .iter()
        .enumerate()
        .map(|(j, &v)| if j == i { 0.0 } else { (-beta * (v - dmin)).exp() })
        .collect();
    let sum: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= sum);
    let h: f64 = -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.log2()).sum::<f64>();
    (p, h)
}

/// Bisection on the Gaussian precision so the row entropy hits `log2(perplexity)`.
/// Returns the row and whether the tolerance was met.
pub(crate) fn calibrate_row(d2: &[f64], i: usize, perplexity: f64) -> (Vec<f64>, f64, bool) {
    let target = perplexity.log2();
    let (mut beta, mut lo, mut hi) = (1.0, 0.0, f64::INFINITY);
    let (mut p, mut h) = row_probs(d2, i, beta);
    for _ in 0..SEARCH_STEPS {
        if (h - target).abs() < ENTROPY_TOL {
            return (p, h, true);
        }
        if h > target {
            lo = beta;
            beta = if hi.is_finite() { 0.5 * (beta + hi) } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = 0.5 * (beta + lo);
        }
        (p, h) = row_probs(d2, i, beta);
    }
    let ok = (h - target).abs() < ENTROPY_TOL;
    (p, h, ok)
}

fn squared_distances(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    x.par_iter()
        .map(|a| {
            x.iter()
                .map(|b| a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum())
                .collect()
        })
        .collect()
}

/// Symmetrized joint probabilities, floored, plus the number of missed rows.
fn joint_probabilities(x: &[Vec<f64>], perplexity: f64) -> (Vec<Vec<f64>>, usize) {
    let n = x.len();
    let d2 = squared_distances(x);
    let rows: Vec<(Vec<f64>, bool)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (p, _, ok) = calibrate_row(&d2[i], i, perplexity);
            (p, ok)
        })
        .collect();
    let misses = rows.iter().filter(|r| !r.1).count();
    let mut p = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i][j] = ((rows[i].0[j] + rows[j].0[i]) / (2.0 * n as f64)).max(P_FLOOR);
            }
        }
    }
    (p, misses)
}

/// Student-t kernel matrix `1/(1+|yi-yj|^2)` (zero diagonal) and its sum.
fn kernel(y: &[[f64; 2]]) -> (Vec<Vec<f64>>, f64) {
    let num: Vec<Vec<f64>> = y
        .par_iter()
        .enumerate()
        .map(|(i, a)| {
            y.iter()
                .enumerate()
                .map(|(j, b)| {
                    if i == j {
                        0.0
                    } else {
                        1.0 / (1.0 + (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2))
                    }
                })
                .collect()
        })
        .collect();
    let total = num.iter().map(|r| r.iter().sum::<f64>()).sum();
    (num, total)
}

fn kl(p: &[Vec<f64>], num: &[Vec<f64>], total: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        for j in 0..p.len() {
            if i != j {
                let q = (num[i][j] / total).max(P_FLOOR);
                s += p[i][j] * (p[i][j] / q).ln();
            }
        }
    }
    s
}

fn initial_embedding(x: &[Vec<f64>], seed: u64) -> Vec<[f64; 2]> {
    let (centered, cov) = center_and_cov(x);
    let pcs = top_eigenpairs(&cov, 2);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
    let mut y: Vec<[f64; 2]> = centered
        .iter()
        .map(|c| [dot(c, &pcs[0].1), dot(c, &pcs[1].1)])
        .collect();
    let n = y.len() as f64;
    let sd = (y.iter().map(|p| p[0] * p[0]).sum::<f64>() / n).sqrt();
    let scale = if sd > 0.0 { 1e-4 / sd } else { 1.0 };
    // seeded jitter at 1% of the initial spread separates duplicate inputs
    let mut rng = seeded(seed);
    for p in &mut y {
        for v in p.iter_mut() {
            let e: f64 = rng.sample(StandardNormal);
            *v = *v * scale + 1e-6 * e;
        }
    }
    y
}

pub fn tsne_project(
    ids: &[String],
    features: &[Vec<f64>],
    config: &TsneConfig,
) -> Result<Projection2D, ProjectionError> {
    Ok(tsne_project_detailed(ids, features, config)?.projection)
}

pub fn tsne_project_detailed(
    ids: &[String],
    features: &[Vec<f64>],
    config: &TsneConfig,
) -> Result<TsneOutcome, ProjectionError> {
    super::check_input(ids, features, 10)?;
    let n = features.len();
    let limit = (n - 1) as f64 / 3.0;
    if !(config.perplexity > 1.0 && config.perplexity < limit) {
        return Err(ProjectionError::PerplexityTooLarge {
            perplexity: config.perplexity,
            limit,
        });
    }
    if features[0].len() < 2 {
        return Err(ProjectionError::DegenerateData);
    }
    let (p, misses) = joint_probabilities(features, config.perplexity);
    if misses > 0 {
        log::warn!("t-SNE bandwidth search missed the entropy tolerance for {misses} points");
    }
    let mut y = initial_embedding(features, config.seed);
    let mut update = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let (num, total) = kernel(&y);
    let first_kl = kl(&p, &num, total);

    for iter in 0..config.iterations {
        let exag = if iter < config.exaggeration_iters {
            config.early_exaggeration
        } else {
            1.0
        };
        let momentum = if iter < MOMENTUM_SWITCH { 0.5 } else { 0.8 };
        let (num, total) = kernel(&y);
        let grad: Vec<[f64; 2]> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut g = [0.0; 2];
                for j in 0..n {
                    if i != j {
                        let coef = 4.0 * (exag * p[i][j] - num[i][j] / total) * num[i][j];
                        g[0] += coef * (y[i][0] - y[j][0]);
                        g[1] += coef * (y[i][1] - y[j][1]);
                    }
                }
                g
            })
            .collect();
        for i in 0..n {
            for k in 0..2 {
                let same_sign = (grad[i][k] > 0.0) == (update[i][k] > 0.0);
                gains[i][k] = if same_sign {
                    gains[i][k] * 0.8
                } else {
                    gains[i][k] + 0.2
                };
                gains[i][k] = gains[i][k].max(MIN_GAIN);
                update[i][k] = momentum * update[i][k] - config.learning_rate * gains[i][k] * grad[i][k];
                y[i][k] += update[i][k];
            }
        }
        for k in 0..2 {
            let mean = y.iter().map(|p| p[k]).sum::<f64>() / n as f64;
            y.iter_mut().for_each(|p| p[k] -= mean);
        }
        if y.iter().flatten().any(|v| !v.is_finite()) {
            return Err(ProjectionError::NonFinite);
        }
    }
    let (num, total) = kernel(&y);
    let final_kl = kl(&p, &num, total);
    Ok(TsneOutcome {
        projection: Projection2D {
            ids: ids.to_vec(),
            points: y,
            method: ProjectionMethod::Tsne,
            final_kl: Some(final_kl),
        },
        first_kl,
        entropy_misses: misses,
    })
}
