//! Seeded inputs shared by the benchmarks.

use originrank_core::corpus::{simulate_recorded, Label, SimConfig, Waveform};
use originrank_core::rng::seeded;
use rand::Rng;

/// One simulated recording of roughly a second.
pub fn recording(seed: u64) -> Waveform {
    simulate_recorded(&SimConfig::default(), &mut seeded(seed)).waveform
}

/// Two shifted uniform clouds, `n` items each side, recorded first.
pub fn labelled_cloud(n: usize, dim: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Label>) {
    let mut rng = seeded(seed);
    let mut features = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(2 * n);
    for label in [Label::Recorded, Label::Synthetic] {
        let shift = if label == Label::Recorded { 0.5 } else { -0.5 };
        for _ in 0..n {
            features.push((0..dim).map(|_| rng.random_range(-1.0..1.0) + shift).collect());
            labels.push(label);
        }
    }
    (features, labels)
}
