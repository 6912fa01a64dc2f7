//! Pairwise ranking: a linear score `r(x) = w.x` trained so recorded items
//! outrank synthetic ones, min-max normalized into an originality in [0, 1].

mod objective;
mod pairs;
mod sgd;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;

pub use objective::{gradient, objective, train_exact, EXACT_GUARD};
pub use pairs::{build_pairs, PairConfig, PairSet};
pub use sgd::{train_sgd, RankTrainConfig};

pub const MODEL_VERSION: &str = "rank-1";

#[derive(Debug, Error)]
pub enum RankError {
    #[error("invalid rank config: {0}")]
    InvalidConfig(String),
    #[error("non-finite values in ranking weights or features")]
    NonFinite,
    #[error("exact solver stopped at gradient norm {grad_norm:e} (tolerance {tol:e})")]
    NotConverged { grad_norm: f64, tol: f64 },
    #[error("score population has fewer than two distinct values")]
    DegeneratePopulation,
    #[error("no {0} items")]
    MissingClass(&'static str),
    #[error("ordered pair set is empty")]
    EmptyOrderedSet,
    #[error("{constraints} constraints exceed the exact-solver limit of {limit}")]
    GuardExceeded { constraints: usize, limit: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("normalization bounds are not set")]
    BoundsUnset,
    #[error("invalid pair: {0}")]
    InvalidPair(String),
    #[error("bad rank model file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankModel {
    pub w: Vec<f64>,
    pub lambda: f64,
    pub mu_s: f64,
    pub score_min: Option<f64>,
    pub score_max: Option<f64>,
    pub feature_dim: usize,
    pub version: String,
}

impl RankModel {
    pub fn new(w: Vec<f64>, lambda: f64, mu_s: f64) -> Self {
        Self {
            feature_dim: w.len(),
            w,
            lambda,
            mu_s,
            score_min: None,
            score_max: None,
            version: MODEL_VERSION.to_string(),
        }
    }

    pub fn score(&self, x: &[f64]) -> Result<f64, RankError> {
        if x.len() != self.feature_dim {
            return Err(RankError::DimMismatch {
                expected: self.feature_dim,
                got: x.len(),
            });
        }
        Ok(objective::dot(&self.w, x))
    }

    pub fn bounds(&self) -> Result<(f64, f64), RankError> {
        match (self.score_min, self.score_max) {
            (Some(lo), Some(hi)) => Ok((lo, hi)),
            _ => Err(RankError::BoundsUnset),
        }
    }

    /// Min-max normalized score, clamped to [0, 1].
    pub fn originality(&self, x: &[f64]) -> Result<f64, RankError> {
        let (lo, hi) = self.bounds()?;
        Ok(originality_from_score(self.score(x)?, lo, hi))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("rank model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, RankError> {
        let m: RankModel = serde_json::from_str(text).map_err(|e| RankError::Format(e.to_string()))?;
        if m.version != MODEL_VERSION {
            return Err(RankError::Format(format!("unsupported version {:?}", m.version)));
        }
        if m.w.len() != m.feature_dim {
            return Err(RankError::Format("feature_dim does not match w".into()));
        }
        if m.w.iter().any(|v| !v.is_finite()) {
            return Err(RankError::NonFinite);
        }
        if let (Some(lo), Some(hi)) = (m.score_min, m.score_max) {
            if !(lo < hi) {
                return Err(RankError::Format("score_min must be below score_max".into()));
            }
        }
        Ok(m)
    }
}

pub fn originality_from_score(score: f64, lo: f64, hi: f64) -> f64 {
    ((score - lo) / (hi - lo)).clamp(0.0, 1.0)
}

/// Set the normalization bounds to the population min and max.
pub fn normalize_fit(model: &RankModel, scores: &[f64]) -> Result<RankModel, RankError> {
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(RankError::NonFinite);
    }
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo < hi) {
        return Err(RankError::DegeneratePopulation);
    }
    Ok(RankModel {
        score_min: Some(lo),
        score_max: Some(hi),
        ..model.clone()
    })
}

/// Fraction of ordered pairs scored recorded-above-synthetic; ties count one half.
pub fn pairwise_accuracy(model: &RankModel, pairs: &PairSet) -> Result<f64, RankError> {
    if pairs.ordered.is_empty() {
        return Err(RankError::EmptyOrderedSet);
    }
    let scores: Vec<f64> = pairs
        .features
        .iter()
        .map(|x| model.score(x))
        .collect::<Result<_, _>>()?;
    let hits: f64 = pairs
        .ordered
        .iter()
        .map(|&(i, j)| match scores[i].partial_cmp(&scores[j]) {
            Some(std::cmp::Ordering::Greater) => 1.0,
            Some(std::cmp::Ordering::Equal) => 0.5,
            _ => 0.0,
        })
        .sum();
    Ok(hits / pairs.ordered.len() as f64)
}

/// Per-dimension standardization followed by a common `1/sqrt(D)` factor, so
/// feature vectors have roughly unit norm before SGD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    /// Multiplier applied after centering.
    pub scale: Vec<f64>,
}

impl FeatureScaler {
    pub fn fit(features: &[Vec<f64>]) -> Result<Self, RankError> {
        let d = features.first().map_or(0, Vec::len);
        if d == 0 {
            return Err(RankError::DimMismatch { expected: 1, got: 0 });
        }
        let n = features.len() as f64;
        let mut mean = vec![0.0; d];
        for x in features {
            if x.len() != d {
                return Err(RankError::DimMismatch {
                    expected: d,
                    got: x.len(),
                });
            }
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for x in features {
            for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        let common = 1.0 / (d as f64).sqrt();
        let scale = var.into_iter().map(|v| common / v.sqrt().max(1e-12)).collect();
        Ok(Self { mean, scale })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) * s)
            .collect()
    }

    /// Weights acting on raw features that give the same score as `w` on scaled
    /// features, up to an additive constant.
    pub fn fold(&self, w: &[f64]) -> Vec<f64> {
        w.iter().zip(&self.scale).map(|(a, s)| a * s).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankFit {
    /// Weights act on raw (unscaled) features; bounds unset.
    pub model: RankModel,
    pub scaler: FeatureScaler,
    pub n_ordered: usize,
    pub n_similar: usize,
    pub train_accuracy: f64,
}

/// Standardize, sample pairs with `pair_seed`, train by SGD and fold the
/// weights back onto raw features.
pub fn fit_ranker(
    features: &[Vec<f64>],
    labels: &[Label],
    pair_config: &PairConfig,
    config: &RankTrainConfig,
    pair_seed: u64,
) -> Result<RankFit, RankError> {
    if features.len() != labels.len() {
        return Err(RankError::DimMismatch {
            expected: features.len(),
            got: labels.len(),
        });
    }
    let scaler = FeatureScaler::fit(features)?;
    let scaled: Vec<Vec<f64>> = features.iter().map(|x| scaler.apply(x)).collect();
    let pairs = build_pairs(scaled, labels.to_vec(), pair_config, pair_seed)?;
    let trained = train_sgd(&pairs, config)?;
    let train_accuracy = pairwise_accuracy(&trained, &pairs)?;
    Ok(RankFit {
        model: RankModel::new(scaler.fold(&trained.w), trained.lambda, trained.mu_s),
        scaler,
        n_ordered: pairs.ordered.len(),
        n_similar: pairs.similar.len(),
        train_accuracy,
    })
}

/// Accuracy of `model` over every (recorded, synthetic) pair of the given items.
pub fn ordered_accuracy(model: &RankModel, features: &[Vec<f64>], labels: &[Label]) -> Result<f64, RankError> {
    let all = PairConfig {
        max_ordered: None,
        max_similar: 0,
    };
    let pairs = build_pairs(features.to_vec(), labels.to_vec(), &all, 0)?;
    pairwise_accuracy(model, &pairs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub id: String,
    pub label: Label,
    pub raw_score: f64,
    pub originality: f64,
}

pub fn write_scores_csv(items: &[ScoredItem], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for item in items {
        w.serialize(item)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scores_csv(input: impl Read) -> csv::Result<Vec<ScoredItem>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;
    use Label::{Recorded as R, Synthetic as S};

    fn toy(seed: u64) -> PairSet {
        let mut rng = seeded(seed);
        let mut features = vec![];
        let mut labels = vec![];
        for i in 0..100 {
            let c = if i < 50 { 1.0 } else { -1.0 };
            features.push(vec![
                c + 0.3 * rng.random_range(-1.0..1.0),
                0.3 * rng.random_range(-1.0..1.0),
            ]);
            labels.push(if i < 50 { R } else { S });
        }
        build_pairs(features, labels, &PairConfig::default(), seed).unwrap()
    }

    #[test]
    fn sgd_separates_toy_data() {
        let p = toy(1);
        let m = train_sgd(
            &p,
            &RankTrainConfig {
                seed: 3,
                ..RankTrainConfig::default()
            },
        )
        .unwrap();
        assert!(pairwise_accuracy(&m, &p).unwrap() >= 0.99);
        assert!(m.w[0] > 0.0);
        assert!(m.score_min.is_none());
    }

    #[test]
    fn folded_ranker_orders_raw_features_like_scaled() {
        let p = toy(5);
        // inflate one axis so scaling matters
        let raw: Vec<Vec<f64>> = p
            .features
            .iter()
            .map(|x| vec![100.0 * x[0] + 7.0, x[1] - 3.0])
            .collect();
        let fit = fit_ranker(&raw, &p.labels, &PairConfig::default(), &RankTrainConfig::default(), 9).unwrap();
        assert!(fit.train_accuracy >= 0.99);
        let scaled_model = RankModel::new(
            fit.model.w.iter().zip(&fit.scaler.scale).map(|(w, s)| w / s).collect(),
            fit.model.lambda,
            fit.model.mu_s,
        );
        let a: Vec<f64> = raw.iter().map(|x| fit.model.score(x).unwrap()).collect();
        let b: Vec<f64> = raw
            .iter()
            .map(|x| scaled_model.score(&fit.scaler.apply(x)).unwrap())
            .collect();
        let shift = a[0] - b[0];
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v - shift).abs() < 1e-9);
        }
        let acc = ordered_accuracy(&fit.model, &raw, &p.labels).unwrap();
        assert!(acc >= 0.99);
        assert_eq!(fit.n_ordered, 2500);
    }

    #[test]
    fn sgd_deterministic_and_projected() {
        let p = toy(2);
        let cfg = RankTrainConfig {
            iterations: 500,
            lambda: 0.5,
            ..RankTrainConfig::default()
        };
        let a = train_sgd(&p, &cfg).unwrap();
        assert_eq!(a, train_sgd(&p, &cfg).unwrap());
        assert!(objective::dot(&a.w, &a.w).sqrt() <= 1.0 / 0.5f64.sqrt() + 1e-12);
    }

    #[test]
    fn sgd_requires_ordered_pairs() {
        let p = PairSet::new(vec![vec![0.0], vec![1.0]], vec![R, R], vec![], vec![(0, 1)]).unwrap();
        assert!(matches!(
            train_sgd(&p, &RankTrainConfig::default()),
            Err(RankError::EmptyOrderedSet)
        ));
        let cfg = RankTrainConfig {
            lambda: 0.0,
            ..RankTrainConfig::default()
        };
        assert!(matches!(train_sgd(&toy(1), &cfg), Err(RankError::InvalidConfig(_))));
    }

    #[test]
    fn score_and_linearity() {
        let m = RankModel::new(vec![1.0, 0.0, 0.0], 1.0, 0.0);
        assert_eq!(m.score(&[3.0, 7.0, -1.0]).unwrap(), 3.0);
        let m = RankModel::new(vec![0.5, -2.0, 1.5], 1.0, 0.0);
        let (x, y) = ([1.0, 2.0, 3.0], [-4.0, 0.5, 2.0]);
        let mix: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 2.0 * a - 3.0 * b).collect();
        let lhs = m.score(&mix).unwrap();
        let rhs = 2.0 * m.score(&x).unwrap() - 3.0 * m.score(&y).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
        assert!(matches!(m.score(&[1.0]), Err(RankError::DimMismatch { .. })));
    }

    #[test]
    fn normalization() {
        let m = RankModel::new(vec![1.0], 1.0, 0.0);
        assert!(matches!(m.originality(&[0.0]), Err(RankError::BoundsUnset)));
        let m = normalize_fit(&m, &[-1.0, 3.0, 0.0]).unwrap();
        assert_eq!(m.bounds().unwrap(), (-1.0, 3.0));
        assert_eq!(m.originality(&[-1.0]).unwrap(), 0.0);
        assert_eq!(m.originality(&[3.0]).unwrap(), 1.0);
        assert_eq!(m.originality(&[1.0]).unwrap(), 0.5);
        assert_eq!(m.originality(&[10.0]).unwrap(), 1.0);
        assert_eq!(m.originality(&[-10.0]).unwrap(), 0.0);
        assert!(matches!(
            normalize_fit(&m, &[2.0, 2.0]),
            Err(RankError::DegeneratePopulation)
        ));
        assert!(matches!(normalize_fit(&m, &[]), Err(RankError::DegeneratePopulation)));
    }

    #[test]
    fn accuracy_edge_cases() {
        let p = toy(3);
        let zero = RankModel::new(vec![0.0, 0.0], 1.0, 0.0);
        assert_eq!(pairwise_accuracy(&zero, &p).unwrap(), 0.5);
        let perfect = RankModel::new(vec![1.0, 0.0], 1.0, 0.0);
        assert_eq!(pairwise_accuracy(&perfect, &p).unwrap(), 1.0);
        let reversed = RankModel::new(vec![-1.0, 0.0], 1.0, 0.0);
        assert_eq!(pairwise_accuracy(&reversed, &p).unwrap(), 0.0);
    }

    #[test]
    fn accuracy_matches_enumeration() {
        for seed in 0..10 {
            let p = toy(seed);
            let mut rng = seeded(seed + 50);
            let m = RankModel::new(vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)], 1.0, 0.0);
            let mut count = 0.0;
            for &(i, j) in &p.ordered {
                let (a, b) = (
                    m.w[0] * p.features[i][0] + m.w[1] * p.features[i][1],
                    m.w[0] * p.features[j][0] + m.w[1] * p.features[j][1],
                );
                count += if a > b {
                    1.0
                } else if a == b {
                    0.5
                } else {
                    0.0
                };
            }
            assert!((pairwise_accuracy(&m, &p).unwrap() - count / p.ordered.len() as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn positive_rescaling_keeps_ranking() {
        let p = toy(4);
        let m = RankModel::new(vec![0.7, -0.4], 1.0, 0.0);
        let m5 = RankModel::new(vec![3.5, -2.0], 1.0, 0.0);
        assert_eq!(pairwise_accuracy(&m, &p).unwrap(), pairwise_accuracy(&m5, &p).unwrap());
        let order = |m: &RankModel| {
            let mut idx: Vec<usize> = (0..p.features.len()).collect();
            idx.sort_by(|&a, &b| {
                m.score(&p.features[a])
                    .unwrap()
                    .total_cmp(&m.score(&p.features[b]).unwrap())
            });
            idx
        };
        assert_eq!(order(&m), order(&m5));
    }

    #[test]
    fn scaler_fold_preserves_score_differences() {
        let feats: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![i as f64 * 3.0 + 100.0, (i as f64).sin(), -5.0 * i as f64])
            .collect();
        let sc = FeatureScaler::fit(&feats).unwrap();
        let w = [0.3, -1.2, 0.8];
        let raw = sc.fold(&w);
        for i in 1..20 {
            let scaled_diff = objective::dot(&w, &sc.apply(&feats[i])) - objective::dot(&w, &sc.apply(&feats[0]));
            let raw_diff = objective::dot(&raw, &feats[i]) - objective::dot(&raw, &feats[0]);
            assert!((scaled_diff - raw_diff).abs() < 1e-9);
        }
        let sq: f64 = feats
            .iter()
            .map(|x| sc.apply(x).iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            / 20.0;
        assert!((sq - 1.0).abs() < 1e-9);
    }

    #[test]
    fn model_and_scores_roundtrip() {
        let m = normalize_fit(&RankModel::new(vec![0.1, -0.2], 1e-3, 0.1), &[0.0, 1.0]).unwrap();
        let text = m.to_json();
        assert!(text.contains("\"rank-1\""));
        assert_eq!(RankModel::from_json(&text).unwrap(), m);
        assert!(RankModel::from_json(&text.replace("rank-1", "rank-2")).is_err());

        let items = vec![
            ScoredItem {
                id: "a".into(),
                label: R,
                raw_score: 1.5,
                originality: 1.0,
            },
            ScoredItem {
                id: "b".into(),
                label: S,
                raw_score: -0.25,
                originality: 0.0,
            },
        ];
        let mut buf = vec![];
        write_scores_csv(&items, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("id,label,raw_score,originality\n"));
        assert!(text.contains("b,synthetic,-0.25,0"));
        assert_eq!(read_scores_csv(buf.as_slice()).unwrap(), items);
    }
}
