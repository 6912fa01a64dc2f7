use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::RankError;
use crate::corpus::Label;
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq)]
pub struct PairSet {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
    /// (recorded, synthetic) index pairs.
    pub ordered: Vec<(usize, usize)>,
    /// Same-class index pairs.
    pub similar: Vec<(usize, usize)>,
}

impl PairSet {
    /// Checked constructor.
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<Label>,
        ordered: Vec<(usize, usize)>,
        similar: Vec<(usize, usize)>,
    ) -> Result<Self, RankError> {
        let set = Self {
            features,
            labels,
            ordered,
            similar,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn n_constraints(&self) -> usize {
        self.ordered.len() + self.similar.len()
    }

    pub fn validate(&self) -> Result<(), RankError> {
        let n = self.features.len();
        if self.labels.len() != n {
            return Err(RankError::DimMismatch {
                expected: n,
                got: self.labels.len(),
            });
        }
        let d = self.dim();
        if let Some(bad) = self.features.iter().find(|x| x.len() != d) {
            return Err(RankError::DimMismatch {
                expected: d,
                got: bad.len(),
            });
        }
        if self.features.iter().flatten().any(|v| !v.is_finite()) {
            return Err(RankError::NonFinite);
        }
        let bad = |m: String| Err(RankError::InvalidPair(m));
        for &(i, j) in self.ordered.iter().chain(&self.similar) {
            if i >= n || j >= n {
                return bad(format!("({i}, {j}) out of range for {n} items"));
            }
            if i == j {
                return bad(format!("self pair ({i}, {i})"));
            }
        }
        for &(i, j) in &self.ordered {
            if self.labels[i] != Label::Recorded || self.labels[j] != Label::Synthetic {
                return bad(format!("ordered pair ({i}, {j}) is not recorded-then-synthetic"));
            }
        }
        for &(i, j) in &self.similar {
            if self.labels[i] != self.labels[j] {
                return bad(format!("similar pair ({i}, {j}) crosses classes"));
            }
        }
        Ok(())
    }

    pub fn diff(&self, (i, j): (usize, usize)) -> Vec<f64> {
        self.features[i]
            .iter()
            .zip(&self.features[j])
            .map(|(a, b)| a - b)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairConfig {
    /// `None` keeps every (recorded, synthetic) pair.
    pub max_ordered: Option<usize>,
    pub max_similar: usize,
}

impl Default for PairConfig {
    fn default() -> Self {
        Self {
            max_ordered: None,
            max_similar: 2000,
        }
    }
}

/// Index of the `k`-th pair `(a, b)`, `a < b`, in row-major order over `m` items.
fn triangular_pair(mut k: usize, m: usize) -> (usize, usize) {
    let mut a = 0;
    while k >= m - 1 - a {
        k -= m - 1 - a;
        a += 1;
    }
    (a, a + 1 + k)
}

fn sample_sorted(rng: &mut rand_chacha::ChaCha8Rng, total: usize, amount: usize) -> Vec<usize> {
    if amount >= total {
        return (0..total).collect();
    }
    let mut picked = index::sample(rng, total, amount).into_vec();
    picked.sort_unstable();
    picked
}

pub fn build_pairs(
    features: Vec<Vec<f64>>,
    labels: Vec<Label>,
    config: &PairConfig,
    seed: u64,
) -> Result<PairSet, RankError> {
    let rec: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == Label::Recorded).collect();
    let syn: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == Label::Synthetic).collect();
    if rec.is_empty() {
        return Err(RankError::MissingClass("recorded"));
    }
    if syn.is_empty() {
        return Err(RankError::MissingClass("synthetic"));
    }
    let mut rng = seeded(seed);
    let total = rec.len() * syn.len();
    let ordered = sample_sorted(&mut rng, total, config.max_ordered.unwrap_or(usize::MAX))
        .into_iter()
        .map(|k| (rec[k / syn.len()], syn[k % syn.len()]))
        .collect();

    let tri = |m: usize| m * m.saturating_sub(1) / 2;
    let (tr, ts) = (tri(rec.len()), tri(syn.len()));
    let similar = sample_sorted(&mut rng, tr + ts, config.max_similar)
        .into_iter()
        .map(|k| {
            if k < tr {
                let (a, b) = triangular_pair(k, rec.len());
                (rec[a], rec[b])
            } else {
                let (a, b) = triangular_pair(k - tr, syn.len());
                (syn[a], syn[b])
            }
        })
        .collect();
    PairSet::new(features, labels, ordered, similar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Recorded as R, Synthetic as S};

    fn feats(n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|i| vec![i as f64, 1.0]).collect()
    }

    #[test]
    fn triangular_enumeration() {
        for m in 2..7 {
            let brute: Vec<(usize, usize)> = (0..m).flat_map(|a| (a + 1..m).map(move |b| (a, b))).collect();
            let fast: Vec<_> = (0..brute.len()).map(|k| triangular_pair(k, m)).collect();
            assert_eq!(brute, fast);
        }
    }

    #[test]
    fn two_by_two_all_pairs() {
        let labels = vec![R, S, R, S];
        let cfg = PairConfig {
            max_ordered: None,
            max_similar: 100,
        };
        let p = build_pairs(feats(4), labels, &cfg, 1).unwrap();
        assert_eq!(p.ordered, vec![(0, 1), (0, 3), (2, 1), (2, 3)]);
        assert_eq!(p.similar, vec![(0, 2), (1, 3)]);
    }

    #[test]
    fn sampling_caps_and_determinism() {
        let labels: Vec<Label> = (0..30).map(|i| if i < 10 { R } else { S }).collect();
        let cfg = PairConfig {
            max_ordered: Some(50),
            max_similar: 7,
        };
        let a = build_pairs(feats(30), labels.clone(), &cfg, 9).unwrap();
        let b = build_pairs(feats(30), labels.clone(), &cfg, 9).unwrap();
        let c = build_pairs(feats(30), labels, &cfg, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.ordered, c.ordered);
        assert_eq!((a.ordered.len(), a.similar.len()), (50, 7));
        let mut uniq = a.ordered.clone();
        uniq.dedup();
        assert_eq!(uniq.len(), 50);
    }

    #[test]
    fn missing_class() {
        assert!(matches!(
            build_pairs(feats(3), vec![R, R, R], &PairConfig::default(), 0),
            Err(RankError::MissingClass("synthetic"))
        ));
        assert!(matches!(
            build_pairs(feats(2), vec![S, S], &PairConfig::default(), 0),
            Err(RankError::MissingClass("recorded"))
        ));
    }

    #[test]
    fn validation_rejects_bad_pairs() {
        let f = feats(3);
        let l = vec![R, S, S];
        assert!(PairSet::new(f.clone(), l.clone(), vec![(1, 0)], vec![]).is_err());
        assert!(PairSet::new(f.clone(), l.clone(), vec![(0, 5)], vec![]).is_err());
        assert!(PairSet::new(f.clone(), l.clone(), vec![(0, 1)], vec![(0, 1)]).is_err());
        assert!(PairSet::new(f.clone(), l.clone(), vec![(0, 1)], vec![(1, 1)]).is_err());
        assert!(PairSet::new(f, l, vec![(0, 1)], vec![(1, 2)]).is_ok());
    }
}
