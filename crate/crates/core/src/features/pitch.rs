//! Normalized-autocorrelation F0 estimation.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::FeatureConfig;

/// Among local NACF maxima, the shortest lag within this fraction of the
/// global maximum wins; suppresses subharmonic (octave-down) picks.
const PEAK_RATIO: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F0Estimate {
    /// Hz, or 0 when unvoiced.
    pub f0: f64,
    pub nacf_peak: f64,
}

impl F0Estimate {
    const UNVOICED: F0Estimate = F0Estimate {
        f0: 0.0,
        nacf_peak: 0.0,
    };
}

pub struct PitchTracker {
    sample_rate: f64,
    window_len: usize,
    lag_min: usize,
    lag_max: usize,
    f0_min: f64,
    f0_max: f64,
    threshold: f64,
    fft_len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl PitchTracker {
    pub fn new(config: &FeatureConfig, sample_rate: u32) -> Self {
        let sr = sample_rate as f64;
        let lag_min = ((sr / config.f0_max).floor() as usize).max(2);
        let lag_max = (sr / config.f0_min).ceil() as usize;
        // two periods of the lowest F0, and room for the +1 lag used by interpolation
        let window_len = ((2.0 * sr / config.f0_min).ceil() as usize).max(2 * lag_max + 2);
        let fft_len = (2 * window_len).next_power_of_two();
        let mut planner = FftPlanner::new();
        Self {
            sample_rate: sr,
            window_len,
            lag_min,
            lag_max,
            f0_min: config.f0_min,
            f0_max: config.f0_max,
            threshold: config.nacf_voicing_threshold,
            fft_len,
            forward: planner.plan_fft_forward(fft_len),
            inverse: planner.plan_fft_inverse(fft_len),
        }
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    /// Analysis window of `window_len` samples centered at `center`, zero padded at the edges.
    pub fn window_at(&self, samples: &[f64], center: usize) -> Vec<f64> {
        let start = center as isize - (self.window_len / 2) as isize;
        (0..self.window_len as isize)
            .map(|i| {
                let n = start + i;
                if n < 0 || n as usize >= samples.len() {
                    0.0
                } else {
                    samples[n as usize]
                }
            })
            .collect()
    }

    pub fn estimate_at(&self, samples: &[f64], center: usize) -> F0Estimate {
        self.estimate(&self.window_at(samples, center))
    }

    /// NACF over lags `0..=lag_max + 1`:
    /// `r(k) / sqrt(e_head(k) e_tail(k))` with both energies taken over the overlap.
    pub fn nacf(&self, window: &[f64]) -> Vec<f64> {
        let n = window.len();
        let top = (self.lag_max + 1).min(n.saturating_sub(1));
        let mut buf: Vec<Complex<f64>> = window.iter().map(|&x| Complex::new(x, 0.0)).collect();
        let fft_len = if 2 * n <= self.fft_len {
            self.fft_len
        } else {
            (2 * n).next_power_of_two()
        };
        buf.resize(fft_len, Complex::new(0.0, 0.0));
        let (forward, inverse) = if fft_len == self.fft_len {
            (self.forward.clone(), self.inverse.clone())
        } else {
            let mut p = FftPlanner::new();
            (p.plan_fft_forward(fft_len), p.plan_fft_inverse(fft_len))
        };
        forward.process(&mut buf);
        for c in buf.iter_mut() {
            *c = Complex::new(c.norm_sqr(), 0.0);
        }
        inverse.process(&mut buf);
        let scale = 1.0 / fft_len as f64;

        let mut prefix = Vec::with_capacity(n + 1);
        prefix.push(0.0);
        for &x in window {
            prefix.push(prefix.last().unwrap() + x * x);
        }
        let total = prefix[n];
        (0..=top)
            .map(|k| {
                let head = prefix[n - k];
                let tail = total - prefix[k];
                let denom = (head * tail).sqrt();
                if denom <= 1e-300 {
                    0.0
                } else {
                    (buf[k].re * scale / denom).clamp(-1.0, 1.0)
                }
            })
            .collect()
    }

    pub fn estimate(&self, window: &[f64]) -> F0Estimate {
        if window.iter().all(|&x| x == 0.0) {
            return F0Estimate::UNVOICED;
        }
        let r = self.nacf(window);
        let hi = self.lag_max.min(r.len().saturating_sub(2));
        if hi <= self.lag_min {
            return F0Estimate::UNVOICED;
        }
        let is_peak = |k: usize| r[k] >= r[k - 1] && r[k] >= r[k + 1];
        let best = (self.lag_min..=hi)
            .filter(|&k| is_peak(k))
            .map(|k| r[k])
            .fold(f64::NEG_INFINITY, f64::max);
        if !best.is_finite() || best <= 0.0 {
            return F0Estimate::UNVOICED;
        }
        let lag = (self.lag_min..=hi)
            .find(|&k| is_peak(k) && r[k] >= PEAK_RATIO * best)
            .expect("global maximum is a candidate");
        let peak = r[lag];
        if peak < self.threshold {
            return F0Estimate {
                f0: 0.0,
                nacf_peak: peak,
            };
        }
        let (a, b, c) = (r[lag - 1], r[lag], r[lag + 1]);
        let curvature = a - 2.0 * b + c;
        let delta = if curvature < 0.0 {
            (0.5 * (a - c) / curvature).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        let f0 = (self.sample_rate / (lag as f64 + delta)).clamp(self.f0_min, self.f0_max);
        F0Estimate { f0, nacf_peak: peak }
    }
}

/// Estimate F0 from an analysis window (at least two periods of `f0_min`).
/// Energy gating is left to the caller; silence always yields 0.
pub fn estimate_f0(window: &[f64], config: &FeatureConfig, sample_rate: u32) -> F0Estimate {
    PitchTracker::new(config, sample_rate).estimate(window)
}
