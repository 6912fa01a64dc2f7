//! Mel scale (HTK formula) and triangular filterbanks.

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Centers (in mel) of `n` triangular bands spanning `[0, nyquist]`.
pub fn band_centers_mel(n: usize, nyquist: f64) -> Vec<f64> {
    let top = hz_to_mel(nyquist);
    (1..=n).map(|k| top * k as f64 / (n + 1) as f64).collect()
}

/// Peak-normalized triangular filters over the `fft_size / 2 + 1` DFT bins.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    /// Per band: first DFT bin and the weights starting there.
    bands: Vec<(usize, Vec<f64>)>,
    n_bins: usize,
}

impl MelFilterbank {
    pub fn new(n_mel: usize, fft_size: usize, sample_rate: f64) -> Self {
        let n_bins = fft_size / 2 + 1;
        let nyquist = sample_rate / 2.0;
        let top = hz_to_mel(nyquist);
        let edges: Vec<f64> = (0..n_mel + 2)
            .map(|k| mel_to_hz(top * k as f64 / (n_mel + 1) as f64))
            .collect();
        let bin_hz = sample_rate / fft_size as f64;
        let bands = (0..n_mel)
            .map(|m| {
                let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
                let mut start = None;
                let mut weights = Vec::new();
                for b in 0..n_bins {
                    let f = b as f64 * bin_hz;
                    let w = if f > lo && f < mid {
                        (f - lo) / (mid - lo)
                    } else if f >= mid && f < hi {
                        (hi - f) / (hi - mid)
                    } else {
                        0.0
                    };
                    if w > 0.0 {
                        start.get_or_insert(b);
                        weights.push(w);
                    } else if start.is_some() {
                        break;
                    }
                }
                (start.unwrap_or(0), weights)
            })
            .collect();
        Self { bands, n_bins }
    }

    pub fn n_mel(&self) -> usize {
        self.bands.len()
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    /// Weighted sum of `magnitudes` (length `n_bins`) for each band.
    pub fn apply(&self, magnitudes: &[f64]) -> Vec<f64> {
        self.bands
            .iter()
            .map(|(start, w)| w.iter().zip(&magnitudes[*start..]).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Weight of band `m` at DFT bin `bin`.
    pub fn weight(&self, m: usize, bin: usize) -> f64 {
        let (start, w) = &self.bands[m];
        if bin < *start {
            return 0.0;
        }
        w.get(bin - start).copied().unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_round_trip() {
        for hz in [0.0, 100.0, 1000.0, 8000.0, 12000.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
        assert!((hz_to_mel(1000.0) - 1000.0).abs() < 0.1);
    }

    #[test]
    fn every_band_has_support() {
        let fb = MelFilterbank::new(24, 1024, 24000.0);
        for m in 0..24 {
            assert!(fb.bands[m].1.iter().any(|&w| w > 0.0), "band {m} empty");
        }
    }

    #[test]
    fn neighbouring_triangles_sum_to_one_inside_range() {
        let fb = MelFilterbank::new(24, 1024, 24000.0);
        // between the first and last centers, adjacent triangles partition unity
        let first = mel_to_hz(band_centers_mel(24, 12000.0)[0]);
        let last = mel_to_hz(band_centers_mel(24, 12000.0)[23]);
        for bin in 0..fb.n_bins() {
            let f = bin as f64 * 24000.0 / 1024.0;
            if f > first && f < last {
                let s: f64 = (0..24).map(|m| fb.weight(m, bin)).sum();
                assert!((s - 1.0).abs() < 1e-9, "bin {bin}: {s}");
            }
        }
    }
}
