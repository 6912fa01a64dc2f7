//! Utterance-level pooling.
//!
//! Layout for `n_mel = K` (dimension `2 (K + 2) + 1`):
//!
//! ```text
//! [0, K)        mean of each envelope bin
//! K             mean gain
//! K + 1         mean voiced F0 (0 if nothing voiced)
//! [K+2, 2K+2)   population std of each envelope bin
//! 2K + 2        std of gain
//! 2K + 3        std of voiced F0 (0 if nothing voiced)
//! 2K + 4        voicing rate
//! ```

use serde::{Deserialize, Serialize};

use super::{FeatureError, FrameFeatures};

pub fn pooled_dim(n_mel: usize) -> usize {
    2 * (n_mel + 2) + 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledVector {
    pub id: String,
    #[serde(rename = "vec")]
    pub values: Vec<f64>,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

pub fn pool_utterance(features: &FrameFeatures) -> Result<Vec<f64>, FeatureError> {
    let t = features.n_frames();
    if t < 2 {
        return Err(FeatureError::TooFewFrames(t));
    }
    let k = features.n_mel();
    let mut means = Vec::with_capacity(k + 2);
    let mut stds = Vec::with_capacity(k + 2);
    for m in 0..k {
        let (mu, sd) = mean_std(features.envelope.iter().map(move |row| row[m]));
        means.push(mu);
        stds.push(sd);
    }
    let (mu, sd) = mean_std(features.gain.iter().copied());
    means.push(mu);
    stds.push(sd);
    let voiced = features
        .f0
        .iter()
        .zip(&features.vuv)
        .filter(|(_, &v)| v == 1)
        .map(|(&f, _)| f);
    let (mu, sd) = mean_std(voiced.clone());
    means.push(mu);
    stds.push(sd);
    let rate = voiced.count() as f64 / t as f64;

    let mut out = means;
    out.extend(stds);
    out.push(rate);
    Ok(out)
}
