use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::mel::MelFilterbank;
use super::FeatureConfig;

pub struct SpectrumAnalyzer {
    fft: Arc<dyn Fft<f64>>,
    fft_size: usize,
    filterbank: MelFilterbank,
    floor: f64,
}

impl SpectrumAnalyzer {
    pub fn new(config: &FeatureConfig, sample_rate: u32) -> Self {
        Self {
            fft: FftPlanner::new().plan_fft_forward(config.fft_size),
            fft_size: config.fft_size,
            filterbank: MelFilterbank::new(config.n_mel, config.fft_size, sample_rate as f64),
            floor: config.mag_floor,
        }
    }

    pub fn magnitudes(&self, frame: &[f64]) -> Vec<f64> {
        assert!(frame.len() <= self.fft_size, "frame longer than fft_size");
        let mut buf: Vec<Complex<f64>> = frame.iter().map(|&x| Complex::new(x, 0.0)).collect();
        buf.resize(self.fft_size, Complex::new(0.0, 0.0));
        self.fft.process(&mut buf);
        buf[..self.filterbank.n_bins()].iter().map(|c| c.norm()).collect()
    }

    /// Log-mel magnitudes in dB of an already windowed frame.
    pub fn log_mel(&self, frame: &[f64]) -> Vec<f64> {
        self.filterbank
            .apply(&self.magnitudes(frame))
            .into_iter()
            .map(|m| 20.0 * m.max(self.floor).log10())
            .collect()
    }
}

/// Single-frame convenience wrapper; batch callers should reuse a [`SpectrumAnalyzer`].
pub fn log_mel_envelope(frame: &[f64], config: &FeatureConfig, sample_rate: u32) -> Vec<f64> {
    SpectrumAnalyzer::new(config, sample_rate).log_mel(frame)
}
