//! Harmonic-plus-noise corpus simulator.
//!
//! Recorded-like utterances are additive harmonic signals driven by a smooth
//! F0 contour, with a spectral envelope built from three formant-like bumps on
//! the mel axis, alternating voiced/unvoiced segments and a white noise floor
//! 40 dB below the harmonic RMS.
//!
//! A synthetic utterance starts from a fresh recorded-like base and is
//! degraded with severity `d` in `[0, 1]`:
//!
//! * F0 multiplicative jitter (per 5 ms control frame, std `0.05 d`) and a
//!   constant bias of up to `5 d` Hz,
//! * moving-average smoothing of the envelope over `1 + ceil(8 d)` mel bins,
//! * noise floor raised by `30 d` dB,
//! * per-frame voicing flips with probability `0.1 d`.
//!
//! The base and the degraded version share phases and the unit noise sequence,
//! so `d = 0` reproduces the base exactly and the pair is time aligned.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::manifest::{write_manifest, CorpusIndex, Label, ManifestError, UtteranceRecord};
use super::wav::{save_wav, WavError, Waveform};
use crate::features::mel::{band_centers_mel, hz_to_mel};

/// Control-frame spacing of the simulator's parameter tracks.
pub const CONTROL_HOP: f64 = 0.005;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulator config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Wav(#[from] WavError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("simulator i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeverityDistribution {
    Uniform {
        low: f64,
        high: f64,
    },
    Fixed {
        value: f64,
    },
    /// Item `i` gets `values[i % values.len()]`.
    Cycle {
        values: Vec<f64>,
    },
}

impl Default for SeverityDistribution {
    fn default() -> Self {
        SeverityDistribution::Uniform { low: 0.0, high: 1.0 }
    }
}

impl SeverityDistribution {
    fn validate(&self) -> Result<(), SimError> {
        let ok = |v: f64| (0.0..=1.0).contains(&v);
        let valid = match self {
            SeverityDistribution::Uniform { low, high } => ok(*low) && ok(*high) && low <= high,
            SeverityDistribution::Fixed { value } => ok(*value),
            SeverityDistribution::Cycle { values } => !values.is_empty() && values.iter().all(|&v| ok(v)),
        };
        if valid {
            Ok(())
        } else {
            Err(SimError::InvalidConfig(format!(
                "severity distribution {self:?} not within [0, 1]"
            )))
        }
    }

    fn draw(&self, index: usize, rng: &mut impl Rng) -> f64 {
        match self {
            SeverityDistribution::Uniform { low, high } if high > low => rng.random_range(*low..=*high),
            SeverityDistribution::Uniform { low, .. } => *low,
            SeverityDistribution::Fixed { value } => *value,
            SeverityDistribution::Cycle { values } => values[index % values.len()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_recorded: usize,
    pub n_synthetic: usize,
    /// Seconds, inclusive.
    pub duration_range: [f64; 2],
    pub sample_rate: u32,
    /// Hz range of the undegraded F0 contour.
    pub f0_range: [f64; 2],
    pub severity: SeverityDistribution,
    /// Number of mel-spaced points the spectral envelope is defined on.
    pub envelope_bins: usize,
    /// Harmonic RMS level in dBFS (before per-utterance jitter).
    pub level_db: f64,
    /// Noise floor of undegraded speech, dB relative to the harmonic RMS.
    pub noise_floor_db: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_recorded: 60,
            n_synthetic: 240,
            duration_range: [0.6, 1.2],
            sample_rate: 24000,
            f0_range: [90.0, 260.0],
            severity: SeverityDistribution::default(),
            envelope_bins: 24,
            level_db: -20.0,
            noise_floor_db: -40.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        if self.n_recorded == 0 || self.n_synthetic == 0 {
            return bad("both n_recorded and n_synthetic must be positive");
        }
        if self.sample_rate == 0 {
            return bad("sample_rate must be positive");
        }
        let [dlo, dhi] = self.duration_range;
        if !(dlo.is_finite() && dhi.is_finite()) || dlo < 0.1 || dlo > dhi {
            return bad("duration_range must satisfy 0.1 <= low <= high");
        }
        let [flo, fhi] = self.f0_range;
        if !(flo > 0.0 && flo <= fhi && fhi < self.sample_rate as f64 / 4.0) {
            return bad("f0_range must satisfy 0 < low <= high < sample_rate / 4");
        }
        if self.envelope_bins < 2 {
            return bad("envelope_bins must be at least 2");
        }
        if !(self.level_db < 0.0 && self.noise_floor_db.is_finite()) {
            return bad("level_db must be negative dBFS");
        }
        self.severity.validate()
    }
}

/// Parameter tracks sampled every [`CONTROL_HOP`] seconds starting at t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub hop_seconds: f64,
    pub f0: Vec<f64>,
    pub voiced: Vec<bool>,
}

impl GroundTruth {
    fn index(&self, t: f64) -> usize {
        ((t / self.hop_seconds).round().max(0.0) as usize).min(self.f0.len() - 1)
    }

    pub fn voiced_at(&self, t: f64) -> bool {
        self.voiced[self.index(t)]
    }

    /// Linearly interpolated contour value (defined in unvoiced regions too).
    pub fn f0_at(&self, t: f64) -> f64 {
        let pos = (t / self.hop_seconds).max(0.0);
        let i = (pos.floor() as usize).min(self.f0.len() - 1);
        let j = (i + 1).min(self.f0.len() - 1);
        let frac = (pos - i as f64).clamp(0.0, 1.0);
        self.f0[i] * (1.0 - frac) + self.f0[j] * frac
    }

    /// F0 (0 when unvoiced) and voicing flag at the given analysis times.
    pub fn tracks_at(&self, times: &[f64]) -> (Vec<f64>, Vec<u8>) {
        times
            .iter()
            .map(|&t| {
                if self.voiced_at(t) {
                    (self.f0_at(t), 1)
                } else {
                    (0.0, 0)
                }
            })
            .unzip()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedUtterance {
    pub waveform: Waveform,
    pub truth: GroundTruth,
}

/// Everything needed to render one utterance.
#[derive(Debug, Clone)]
struct Plan {
    sample_rate: f64,
    n_samples: usize,
    f0: Vec<f64>,
    voiced: Vec<bool>,
    /// Envelope (dB, on the mel grid) used by each control frame.
    envelope_of_frame: Vec<usize>,
    envelopes: Vec<Vec<f64>>,
    grid_mel: Vec<f64>,
    phase0: f64,
    unit_noise: Vec<f64>,
    /// Linear RMS of the noise floor.
    noise_rms: f64,
}

fn n_control_frames(n_samples: usize, sr: f64) -> usize {
    (n_samples as f64 / (CONTROL_HOP * sr)).ceil() as usize + 1
}

fn random_envelope(grid_mel: &[f64], tilt_db: f64, offset_db: f64, rng: &mut impl Rng) -> Vec<f64> {
    let top = *grid_mel.last().unwrap();
    let formants = [
        (rng.random_range(300.0..900.0), rng.random_range(14.0..24.0)),
        (rng.random_range(1000.0..2400.0), rng.random_range(10.0..20.0)),
        (rng.random_range(2400.0..3400.0), rng.random_range(8.0..16.0)),
    ];
    let widths: Vec<f64> = (0..3).map(|_| rng.random_range(40.0..90.0)).collect();
    grid_mel
        .iter()
        .map(|&m| {
            let bumps: f64 = formants
                .iter()
                .zip(&widths)
                .map(|(&(hz, amp), w)| {
                    let c = hz_to_mel(hz);
                    amp * (-(m - c).powi(2) / (2.0 * w * w)).exp()
                })
                .sum();
            offset_db - tilt_db * m / top + bumps
        })
        .collect()
}

fn base_plan(config: &SimConfig, rng: &mut ChaCha8Rng) -> Plan {
    let sr = config.sample_rate as f64;
    let [dlo, dhi] = config.duration_range;
    let duration = if dhi > dlo { rng.random_range(dlo..=dhi) } else { dlo };
    let n_samples = (duration * sr).round() as usize;
    let n_frames = n_control_frames(n_samples, sr);
    let grid_mel = band_centers_mel(config.envelope_bins, sr / 2.0);

    let [flo, fhi] = config.f0_range;
    let center = if fhi > flo { rng.random_range(flo..=fhi) } else { flo };
    let declination = rng.random_range(0.0..0.15);
    let mods: Vec<(f64, f64, f64)> = (0..2)
        .map(|_| {
            (
                rng.random_range(0.0..0.06),
                rng.random_range(0.5..3.0),
                rng.random_range(0.0..2.0 * PI),
            )
        })
        .collect();
    let f0: Vec<f64> = (0..n_frames)
        .map(|k| {
            let t = k as f64 * CONTROL_HOP;
            let wobble: f64 = mods.iter().map(|&(a, r, p)| a * (2.0 * PI * r * t + p).sin()).sum();
            (center * (1.0 - declination * t / duration) * (1.0 + wobble)).clamp(flo, fhi)
        })
        .collect();

    // alternate unvoiced and voiced segments, each with its own vowel envelope
    let tilt = rng.random_range(40.0..50.0);
    let offset = -8.0 + rng.random_range(-2.0..2.0);
    let mut voiced = vec![false; n_frames];
    let mut envelope_of_frame = vec![0; n_frames];
    let mut envelopes = vec![random_envelope(&grid_mel, tilt, offset, rng)];
    let mut k = (rng.random_range(0.04..0.08) / CONTROL_HOP) as usize;
    while k < n_frames {
        let len = (rng.random_range(0.12..0.35) / CONTROL_HOP) as usize;
        let gap = (rng.random_range(0.03..0.10) / CONTROL_HOP) as usize;
        let seg = envelopes.len() - 1;
        for j in k..(k + len).min(n_frames) {
            voiced[j] = true;
            envelope_of_frame[j] = seg;
        }
        let next = (k + len + gap).min(n_frames);
        for e in envelope_of_frame.iter_mut().take(next).skip(k + len) {
            *e = seg;
        }
        envelopes.push(random_envelope(&grid_mel, tilt, offset, rng));
        k = next;
    }

    let unit_noise: Vec<f64> = (0..n_samples).map(|_| rng.sample(StandardNormal)).collect();
    let phase0 = rng.random_range(0.0..2.0 * PI);
    let level_jitter = rng.random_range(-2.0..2.0);
    let mut plan = Plan {
        sample_rate: sr,
        n_samples,
        f0,
        voiced,
        envelope_of_frame,
        envelopes,
        grid_mel,
        phase0,
        unit_noise,
        noise_rms: 0.0,
    };
    // scale the envelopes so the harmonic part sits at the configured level
    let harmonic = render_harmonics(&plan);
    let voiced_samples: Vec<f64> = harmonic
        .iter()
        .enumerate()
        .filter(|(n, _)| plan.voiced[(*n as f64 / (CONTROL_HOP * sr)).round() as usize])
        .map(|(_, &x)| x)
        .collect();
    let rms = if voiced_samples.is_empty() {
        1e-3
    } else {
        (voiced_samples.iter().map(|x| x * x).sum::<f64>() / voiced_samples.len() as f64).sqrt()
    };
    let target = 10f64.powf((config.level_db + level_jitter) / 20.0);
    let shift_db = 20.0 * (target / rms.max(1e-12)).log10();
    for env in &mut plan.envelopes {
        env.iter_mut().for_each(|v| *v += shift_db);
    }
    plan.noise_rms = target * 10f64.powf(config.noise_floor_db / 20.0);
    plan
}

/// Centered moving average with the window truncated at the edges.
fn smooth_envelope(env: &[f64], width: usize) -> Vec<f64> {
    if width <= 1 {
        return env.to_vec();
    }
    let half_lo = (width - 1) / 2;
    let half_hi = width - 1 - half_lo;
    (0..env.len())
        .map(|i| {
            let lo = i.saturating_sub(half_lo);
            let hi = (i + half_hi).min(env.len() - 1);
            env[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

pub fn smoothing_width(severity: f64) -> usize {
    1 + (8.0 * severity).ceil() as usize
}

fn degrade(plan: &Plan, d: f64, rng: &mut ChaCha8Rng) -> Plan {
    let mut out = plan.clone();
    let bias = rng.random_range(0.0..=1.0) * 5.0 * d * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    for f in &mut out.f0 {
        let n: f64 = rng.sample(StandardNormal);
        *f = (*f * (1.0 + 0.05 * d * n) + bias).max(20.0);
    }
    let width = smoothing_width(d);
    for env in &mut out.envelopes {
        *env = smooth_envelope(env, width);
    }
    out.noise_rms *= 10f64.powf(30.0 * d / 20.0);
    for v in &mut out.voiced {
        if rng.random_bool((0.1 * d).clamp(0.0, 1.0)) {
            *v = !*v;
        }
    }
    out
}

fn envelope_db_at(grid: &[f64], env: &[f64], mel: f64) -> f64 {
    if mel <= grid[0] {
        return env[0];
    }
    let last = grid.len() - 1;
    if mel >= grid[last] {
        return env[last];
    }
    let step = grid[1] - grid[0];
    let pos = (mel - grid[0]) / step;
    let i = (pos.floor() as usize).min(last - 1);
    let frac = pos - i as f64;
    env[i] * (1.0 - frac) + env[i + 1] * frac
}

fn render_harmonics(plan: &Plan) -> Vec<f64> {
    let sr = plan.sample_rate;
    let hop = CONTROL_HOP * sr;
    let nyquist_guard = 0.95 * sr / 2.0;
    let n_frames = plan.f0.len();
    let max_harm = (nyquist_guard / plan.f0.iter().cloned().fold(f64::INFINITY, f64::min)).floor() as usize;

    // linear harmonic amplitudes per control frame, silenced where unvoiced
    let amps: Vec<Vec<f64>> = (0..n_frames)
        .map(|k| {
            let f0 = plan.f0[k];
            let env = &plan.envelopes[plan.envelope_of_frame[k]];
            (1..=max_harm)
                .map(|h| {
                    let f = h as f64 * f0;
                    if !plan.voiced[k] || f >= nyquist_guard {
                        0.0
                    } else {
                        10f64.powf(envelope_db_at(&plan.grid_mel, env, hz_to_mel(f)) / 20.0)
                    }
                })
                .collect()
        })
        .collect();

    let mut out = vec![0.0; plan.n_samples];
    let mut phase = plan.phase0;
    for (n, y) in out.iter_mut().enumerate() {
        let pos = n as f64 / hop;
        let i = (pos.floor() as usize).min(n_frames - 1);
        let j = (i + 1).min(n_frames - 1);
        let frac = pos - i as f64;
        let f0 = plan.f0[i] * (1.0 - frac) + plan.f0[j] * frac;
        let (s1, c1) = phase.sin_cos();
        let (mut s, mut c) = (s1, c1);
        let mut acc = 0.0;
        for (a, b) in amps[i].iter().zip(&amps[j]) {
            let amp = a * (1.0 - frac) + b * frac;
            acc += amp * s;
            // rotate to the next harmonic
            let ns = s * c1 + c * s1;
            c = c * c1 - s * s1;
            s = ns;
        }
        *y = acc;
        phase = (phase + 2.0 * PI * f0 / sr) % (2.0 * PI);
    }
    out
}

fn render(plan: &Plan) -> SimulatedUtterance {
    let harmonic = render_harmonics(plan);
    let samples = harmonic
        .iter()
        .zip(&plan.unit_noise)
        .map(|(h, n)| (h + plan.noise_rms * n).clamp(-1.0, 1.0))
        .collect();
    SimulatedUtterance {
        waveform: Waveform::new(samples, plan.sample_rate as u32),
        truth: GroundTruth {
            hop_seconds: CONTROL_HOP,
            f0: plan.f0.clone(),
            voiced: plan.voiced.clone(),
        },
    }
}

/// One recorded-like utterance.
pub fn simulate_recorded(config: &SimConfig, rng: &mut ChaCha8Rng) -> SimulatedUtterance {
    render(&base_plan(config, rng))
}

/// A fresh base utterance and its degraded copy at severity `d`.
pub fn simulate_pair(config: &SimConfig, d: f64, rng: &mut ChaCha8Rng) -> (SimulatedUtterance, SimulatedUtterance) {
    let base = base_plan(config, rng);
    let degraded = degrade(&base, d, rng);
    (render(&base), render(&degraded))
}

#[derive(Debug, Clone)]
pub struct SimItem {
    pub record: UtteranceRecord,
    pub utterance: SimulatedUtterance,
    pub base: Option<SimulatedUtterance>,
}

fn item_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generate a whole corpus in memory. Item `i` depends only on `(config, seed, i)`.
pub fn generate_corpus(config: &SimConfig, seed: u64) -> Result<Vec<SimItem>, SimError> {
    config.validate()?;
    let sr = config.sample_rate;
    let recorded = (0..config.n_recorded).into_par_iter().map(|i| {
        let mut rng = item_rng(seed, i as u64);
        let id = format!("rec{:05}", i + 1);
        SimItem {
            record: UtteranceRecord {
                path: format!("wav/{id}.wav"),
                id,
                label: Label::Recorded,
                sample_rate: sr,
                degradation: None,
                base_id: None,
                base_path: None,
            },
            utterance: simulate_recorded(config, &mut rng),
            base: None,
        }
    });
    let synthetic = (0..config.n_synthetic).into_par_iter().map(|i| {
        let mut rng = item_rng(seed, (1u64 << 32) + i as u64);
        let d = config.severity.draw(i, &mut rng);
        let (base, degraded) = simulate_pair(config, d, &mut rng);
        let id = format!("syn{:05}", i + 1);
        let base_id = format!("{id}-base");
        SimItem {
            record: UtteranceRecord {
                path: format!("wav/{id}.wav"),
                base_path: Some(format!("base/{base_id}.wav")),
                id,
                label: Label::Synthetic,
                sample_rate: sr,
                degradation: Some(d),
                base_id: Some(base_id),
            },
            utterance: degraded,
            base: Some(base),
        }
    });
    let mut items: Vec<SimItem> = recorded.collect();
    items.extend(synthetic.collect::<Vec<_>>());
    Ok(items)
}

/// Generate a corpus and write `manifest.jsonl`, `wav/` and `base/` under `out_dir`.
pub fn simulate_corpus(config: &SimConfig, seed: u64, out_dir: impl AsRef<Path>) -> Result<CorpusIndex, SimError> {
    let out_dir = out_dir.as_ref();
    let items = generate_corpus(config, seed)?;
    for sub in ["wav", "base"] {
        let p = out_dir.join(sub);
        fs::create_dir_all(&p).map_err(|source| SimError::Io {
            path: p.display().to_string(),
            source,
        })?;
    }
    items.par_iter().try_for_each(|item| -> Result<(), SimError> {
        save_wav(&item.utterance.waveform, out_dir.join(&item.record.path))?;
        if let (Some(base), Some(path)) = (&item.base, &item.record.base_path) {
            save_wav(&base.waveform, out_dir.join(path))?;
        }
        Ok(())
    })?;
    let records: Vec<UtteranceRecord> = items.into_iter().map(|i| i.record).collect();
    write_manifest(&records, out_dir.join("manifest.jsonl"))?;
    Ok(CorpusIndex {
        records,
        root: out_dir.to_path_buf(),
    })
}
