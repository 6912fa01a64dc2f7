//! Frame-level acoustic analysis (log-mel envelope, F0, gain, voicing) and
//! utterance-level pooling.

pub mod mel;
mod pitch;
mod pool;
mod spectrum;

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Waveform;

pub use pitch::{estimate_f0, F0Estimate, PitchTracker};
pub use pool::{pool_utterance, pooled_dim, PooledVector};
pub use spectrum::{log_mel_envelope, SpectrumAnalyzer};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("signal of {samples} samples is shorter than one {needed}-sample frame")]
    TooShort { samples: usize, needed: usize },
    #[error("pooling needs at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("invalid feature config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    /// Seconds between frames.
    pub frame_hop: f64,
    /// Seconds per analysis frame.
    pub frame_len: f64,
    pub fft_size: usize,
    pub n_mel: usize,
    pub f0_min: f64,
    pub f0_max: f64,
    pub nacf_voicing_threshold: f64,
    /// Frames quieter than the loudest frame by more than this many dB are unvoiced.
    pub energy_gate_db: f64,
    pub mag_floor: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            frame_hop: 0.005,
            frame_len: 0.025,
            fft_size: 1024,
            n_mel: 24,
            f0_min: 70.0,
            f0_max: 400.0,
            nacf_voicing_threshold: 0.30,
            energy_gate_db: -60.0,
            mag_floor: 1e-10,
        }
    }
}

impl FeatureConfig {
    pub fn frame_len_samples(&self, sample_rate: u32) -> usize {
        (self.frame_len * sample_rate as f64).round() as usize
    }

    pub fn hop_samples(&self, sample_rate: u32) -> usize {
        (self.frame_hop * sample_rate as f64).round() as usize
    }

    /// `1 + floor((L - frame) / hop)`, or `None` when the signal is shorter than a frame.
    pub fn frame_count(&self, n_samples: usize, sample_rate: u32) -> Option<usize> {
        let frame = self.frame_len_samples(sample_rate);
        let hop = self.hop_samples(sample_rate);
        (n_samples >= frame).then(|| 1 + (n_samples - frame) / hop)
    }

    /// Time (s) of the center of frame `t`.
    pub fn frame_center(&self, t: usize, sample_rate: u32) -> f64 {
        let sr = sample_rate as f64;
        (t * self.hop_samples(sample_rate)) as f64 / sr + self.frame_len_samples(sample_rate) as f64 / (2.0 * sr)
    }

    pub fn validate(&self, sample_rate: u32) -> Result<(), FeatureError> {
        let bad = |m: String| Err(FeatureError::InvalidConfig(m));
        let sr = sample_rate as f64;
        if sample_rate == 0 {
            return bad("sample rate must be positive".into());
        }
        if !(self.frame_hop > 0.0 && self.frame_len >= self.frame_hop) {
            return bad(format!(
                "need 0 < frame_hop <= frame_len, got {} / {}",
                self.frame_hop, self.frame_len
            ));
        }
        if self.hop_samples(sample_rate) == 0 {
            return bad("frame_hop is shorter than one sample".into());
        }
        if !(self.f0_min > 0.0 && self.f0_min < self.f0_max && self.f0_max < sr / 2.0) {
            return bad(format!("need 0 < f0_min < f0_max < {}", sr / 2.0));
        }
        if self.n_mel < 2 {
            return bad("n_mel must be at least 2".into());
        }
        if !self.fft_size.is_power_of_two() || self.fft_size < self.frame_len_samples(sample_rate) {
            return bad(format!(
                "fft_size {} must be a power of two >= {} frame samples",
                self.fft_size,
                self.frame_len_samples(sample_rate)
            ));
        }
        if !(self.mag_floor > 0.0) {
            return bad("mag_floor must be positive".into());
        }
        Ok(())
    }
}

/// Per-frame acoustic features, all tracks of equal length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameFeatures {
    /// `T x n_mel`, dB.
    pub envelope: Vec<Vec<f64>>,
    /// Hz, 0 where unvoiced.
    pub f0: Vec<f64>,
    /// dB.
    pub gain: Vec<f64>,
    pub vuv: Vec<u8>,
}

impl FrameFeatures {
    pub fn n_frames(&self) -> usize {
        self.f0.len()
    }

    pub fn n_mel(&self) -> usize {
        self.envelope.first().map_or(0, Vec::len)
    }

    /// Debug dump: header `mel_0..mel_{n-1},f0,gain,vuv`, one row per frame.
    pub fn write_csv(&self, out: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.n_mel()).map(|k| format!("mel_{k}")).collect();
        header.extend(["f0".into(), "gain".into(), "vuv".into()]);
        w.write_record(&header)?;
        for t in 0..self.n_frames() {
            let mut row: Vec<String> = self.envelope[t].iter().map(f64::to_string).collect();
            row.push(self.f0[t].to_string());
            row.push(self.gain[t].to_string());
            row.push(self.vuv[t].to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

fn raw_frames<'a>(waveform: &'a Waveform, config: &FeatureConfig) -> Result<Vec<&'a [f64]>, FeatureError> {
    let sr = waveform.sample_rate;
    let frame = config.frame_len_samples(sr);
    let hop = config.hop_samples(sr);
    let n = config.frame_count(waveform.len(), sr).ok_or(FeatureError::TooShort {
        samples: waveform.len(),
        needed: frame,
    })?;
    Ok((0..n).map(|t| &waveform.samples[t * hop..t * hop + frame]).collect())
}

/// Hann-windowed frames at hop spacing.
pub fn frame_signal(waveform: &Waveform, config: &FeatureConfig) -> Result<Vec<Vec<f64>>, FeatureError> {
    config.validate(waveform.sample_rate)?;
    let frames = raw_frames(waveform, config)?;
    let window = hann(config.frame_len_samples(waveform.sample_rate));
    Ok(frames
        .into_iter()
        .map(|f| f.iter().zip(&window).map(|(x, w)| x * w).collect())
        .collect())
}

/// `10 log10(max(mean(x^2), floor^2))`.
pub fn frame_gain(frame: &[f64], mag_floor: f64) -> f64 {
    let ms = if frame.is_empty() {
        0.0
    } else {
        frame.iter().map(|x| x * x).sum::<f64>() / frame.len() as f64
    };
    10.0 * ms.max(mag_floor * mag_floor).log10()
}

/// Reusable analysis state (FFT plans, filterbank, windows) for one sample rate.
pub struct FeatureExtractor {
    config: FeatureConfig,
    sample_rate: u32,
    spectrum: SpectrumAnalyzer,
    pitch: PitchTracker,
    window: Vec<f64>,
}

impl FeatureExtractor {
    pub fn new(config: &FeatureConfig, sample_rate: u32) -> Result<Self, FeatureError> {
        config.validate(sample_rate)?;
        Ok(Self {
            config: config.clone(),
            sample_rate,
            spectrum: SpectrumAnalyzer::new(config, sample_rate),
            pitch: PitchTracker::new(config, sample_rate),
            window: hann(config.frame_len_samples(sample_rate)),
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn extract(&self, waveform: &Waveform) -> Result<FrameFeatures, FeatureError> {
        if waveform.sample_rate != self.sample_rate {
            return Err(FeatureError::InvalidConfig(format!(
                "extractor built for {} Hz, waveform is {} Hz",
                self.sample_rate, waveform.sample_rate
            )));
        }
        let frames = raw_frames(waveform, &self.config)?;
        let floor = self.config.mag_floor;
        let gain: Vec<f64> = frames.iter().map(|f| frame_gain(f, floor)).collect();
        let loudest = gain.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let gate = loudest + self.config.energy_gate_db;
        let silence = 20.0 * floor.log10();

        let hop = self.config.hop_samples(self.sample_rate);
        let frame_len = self.config.frame_len_samples(self.sample_rate);
        let mut envelope = Vec::with_capacity(frames.len());
        let mut f0 = Vec::with_capacity(frames.len());
        let mut vuv = Vec::with_capacity(frames.len());
        let mut windowed = vec![0.0; frame_len];
        for (t, frame) in frames.iter().enumerate() {
            for ((w, x), h) in windowed.iter_mut().zip(frame.iter()).zip(&self.window) {
                *w = x * h;
            }
            envelope.push(self.spectrum.log_mel(&windowed));
            let voiced_f0 = if gain[t] > silence && gain[t] >= gate {
                let center = t * hop + frame_len / 2;
                let est = self.pitch.estimate_at(&waveform.samples, center);
                est.f0
            } else {
                0.0
            };
            f0.push(voiced_f0);
            vuv.push(u8::from(voiced_f0 > 0.0));
        }
        Ok(FrameFeatures {
            envelope,
            f0,
            gain,
            vuv,
        })
    }
}

pub fn extract_features(waveform: &Waveform, config: &FeatureConfig) -> Result<FrameFeatures, FeatureError> {
    FeatureExtractor::new(config, waveform.sample_rate)?.extract(waveform)
}
