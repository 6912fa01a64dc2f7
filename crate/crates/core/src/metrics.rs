//! Distortion metrics between time-aligned feature tracks, and 95% intervals over utterance sets.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FrameFeatures;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooFew { got: usize, needed: usize },
}

fn same_length(a: &FrameFeatures, b: &FrameFeatures) -> Result<usize, MetricError> {
    let (ta, tb) = (a.n_frames(), b.n_frames());
    if ta != tb || a.gain.len() != ta || b.gain.len() != tb || a.vuv.len() != ta || b.vuv.len() != tb {
        return Err(MetricError::LengthMismatch(ta, tb));
    }
    if ta == 0 {
        return Err(MetricError::TooFew { got: 0, needed: 1 });
    }
    Ok(ta)
}

/// Frames voiced in both tracks.
pub fn mutually_voiced(a: &FrameFeatures, b: &FrameFeatures) -> usize {
    a.vuv.iter().zip(&b.vuv).filter(|(x, y)| **x == 1 && **y == 1).count()
}

/// RMSE (Hz) over mutually voiced frames; 0 when there are none (see [`mutually_voiced`]).
pub fn f0_rmse(a: &FrameFeatures, b: &FrameFeatures) -> Result<f64, MetricError> {
    same_length(a, b)?;
    let (mut sum, mut n) = (0.0, 0usize);
    for t in 0..a.n_frames() {
        if a.vuv[t] == 1 && b.vuv[t] == 1 {
            sum += (a.f0[t] - b.f0[t]).powi(2);
            n += 1;
        }
    }
    Ok(if n == 0 { 0.0 } else { (sum / n as f64).sqrt() })
}

/// Frame-averaged RMS difference of the log-mel envelopes (dB).
pub fn lsd(a: &FrameFeatures, b: &FrameFeatures) -> Result<f64, MetricError> {
    let t = same_length(a, b)?;
    let mut total = 0.0;
    for (ra, rb) in a.envelope.iter().zip(&b.envelope) {
        if ra.len() != rb.len() || ra.is_empty() {
            return Err(MetricError::LengthMismatch(ra.len(), rb.len()));
        }
        let ms = ra.iter().zip(rb).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / ra.len() as f64;
        total += ms.sqrt();
    }
    Ok(total / t as f64)
}

pub fn gain_rmse(a: &FrameFeatures, b: &FrameFeatures) -> Result<f64, MetricError> {
    let t = same_length(a, b)?;
    let ss: f64 = a.gain.iter().zip(&b.gain).map(|(x, y)| (x - y).powi(2)).sum();
    Ok((ss / t as f64).sqrt())
}

/// Percentage of frames whose voicing flags differ.
pub fn vuv_error_rate(a: &FrameFeatures, b: &FrameFeatures) -> Result<f64, MetricError> {
    let t = same_length(a, b)?;
    let diff = a.vuv.iter().zip(&b.vuv).filter(|(x, y)| x != y).count();
    Ok(100.0 * diff as f64 / t as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub half_width: f64,
    pub n: usize,
}

/// Mean and `1.96 s / sqrt(n)`, `s` the sample standard deviation.
pub fn ci95(values: &[f64]) -> Result<Interval, MetricError> {
    let n = values.len();
    if n < 2 {
        return Err(MetricError::TooFew { got: n, needed: 2 });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(Interval {
        mean,
        half_width: 1.96 * var.sqrt() / (n as f64).sqrt(),
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Over utterances with at least one mutually voiced frame.
    pub f0_rmse_hz: Interval,
    pub lsd_db: Interval,
    pub gain_rmse_db: Interval,
    pub vuv_error_pct: Interval,
    pub n_utterances: usize,
}

/// Per-utterance values of the four metrics for one aligned pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    /// `None` when no frame is voiced in both tracks.
    pub f0_rmse_hz: Option<f64>,
    pub lsd_db: f64,
    pub gain_rmse_db: f64,
    pub vuv_error_pct: f64,
}

pub fn pair_metrics(a: &FrameFeatures, b: &FrameFeatures) -> Result<PairMetrics, MetricError> {
    Ok(PairMetrics {
        f0_rmse_hz: (mutually_voiced(a, b) > 0).then(|| f0_rmse(a, b)).transpose()?,
        lsd_db: lsd(a, b)?,
        gain_rmse_db: gain_rmse(a, b)?,
        vuv_error_pct: vuv_error_rate(a, b)?,
    })
}

pub fn report(pairs: &[PairMetrics]) -> Result<MetricReport, MetricError> {
    let f0: Vec<f64> = pairs.iter().filter_map(|p| p.f0_rmse_hz).collect();
    let col = |f: fn(&PairMetrics) -> f64| pairs.iter().map(f).collect::<Vec<f64>>();
    Ok(MetricReport {
        f0_rmse_hz: ci95(&f0)?,
        lsd_db: ci95(&col(|p| p.lsd_db))?,
        gain_rmse_db: ci95(&col(|p| p.gain_rmse_db))?,
        vuv_error_pct: ci95(&col(|p| p.vuv_error_pct))?,
        n_utterances: pairs.len(),
    })
}

/// Reports for the high- and low-originality groups of (base, synthetic) feature pairs.
pub fn group_report(
    high: &[(&FrameFeatures, &FrameFeatures)],
    low: &[(&FrameFeatures, &FrameFeatures)],
) -> Result<(MetricReport, MetricReport), MetricError> {
    let metrics = |g: &[(&FrameFeatures, &FrameFeatures)]| -> Result<Vec<PairMetrics>, MetricError> {
        g.iter().map(|(a, b)| pair_metrics(a, b)).collect()
    };
    Ok((report(&metrics(high)?)?, report(&metrics(low)?)?))
}

impl MetricReport {
    fn rows(&self) -> [(&'static str, Interval); 4] {
        [
            ("f0_rmse_hz", self.f0_rmse_hz),
            ("lsd_db", self.lsd_db),
            ("gain_rmse_db", self.gain_rmse_db),
            ("vuv_error_pct", self.vuv_error_pct),
        ]
    }
}

/// Rows `group,metric,mean,ci_half_width,n`.
pub fn write_report_csv(groups: &[(&str, &MetricReport)], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["group", "metric", "mean", "ci_half_width", "n"])?;
    for (name, r) in groups {
        for (metric, iv) in r.rows() {
            w.write_record([
                name.to_string(),
                metric.to_string(),
                iv.mean.to_string(),
                iv.half_width.to_string(),
                iv.n.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per group, columns per metric as `mean ± half-width`.
pub fn format_table(groups: &[(&str, &MetricReport)]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<10} {:>18} {:>16} {:>16} {:>16} {:>5}",
        "group", "F0 RMSE (Hz)", "LSD (dB)", "Gain RMSE (dB)", "V/UV error (%)", "n"
    );
    for (name, r) in groups {
        let cell = |iv: Interval| format!("{:.2} ± {:.2}", iv.mean, iv.half_width);
        let _ = writeln!(
            s,
            "{:<10} {:>18} {:>16} {:>16} {:>16} {:>5}",
            name,
            cell(r.f0_rmse_hz),
            cell(r.lsd_db),
            cell(r.gain_rmse_db),
            cell(r.vuv_error_pct),
            r.n_utterances
        );
    }
    s
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties. `NaN` if either input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(MetricError::TooFew {
            got: x.len(),
            needed: 2,
        });
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_features(t: usize, k: usize, seed: u64) -> FrameFeatures {
        let mut rng = seeded(seed);
        let vuv: Vec<u8> = (0..t).map(|_| u8::from(rng.random_bool(0.7))).collect();
        FrameFeatures {
            envelope: (0..t)
                .map(|_| (0..k).map(|_| rng.random_range(-80.0..0.0)).collect())
                .collect(),
            f0: vuv
                .iter()
                .map(|&v| if v == 1 { rng.random_range(80.0..300.0) } else { 0.0 })
                .collect(),
            gain: (0..t).map(|_| rng.random_range(-60.0..0.0)).collect(),
            vuv,
        }
    }

    #[test]
    fn self_distance_is_zero() {
        let a = random_features(50, 8, 1);
        assert_eq!(f0_rmse(&a, &a).unwrap(), 0.0);
        assert_eq!(lsd(&a, &a).unwrap(), 0.0);
        assert_eq!(gain_rmse(&a, &a).unwrap(), 0.0);
        assert_eq!(vuv_error_rate(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn offsets() {
        let a = random_features(50, 8, 2);
        let mut b = a.clone();
        for t in 0..50 {
            if b.vuv[t] == 1 {
                b.f0[t] += 10.0;
            }
            b.gain[t] += 3.0;
            b.envelope[t].iter_mut().for_each(|v| *v += 20.0);
        }
        assert!((f0_rmse(&a, &b).unwrap() - 10.0).abs() < 1e-9);
        assert!((lsd(&a, &b).unwrap() - 20.0).abs() < 1e-9);
        assert!((gain_rmse(&a, &b).unwrap() - 3.0).abs() < 1e-9);
        b.vuv = a.vuv.iter().map(|v| 1 - v).collect();
        assert_eq!(vuv_error_rate(&a, &b).unwrap(), 100.0);
        assert_eq!(mutually_voiced(&a, &b), 0);
        assert_eq!(f0_rmse(&a, &b).unwrap(), 0.0);
        assert_eq!(pair_metrics(&a, &b).unwrap().f0_rmse_hz, None);
    }

    #[test]
    fn f0_uses_only_mutually_voiced_frames() {
        let mut a = random_features(4, 2, 3);
        a.vuv = vec![1, 1, 0, 1];
        a.f0 = vec![100.0, 100.0, 0.0, 100.0];
        let mut b = a.clone();
        b.vuv = vec![1, 0, 1, 1];
        b.f0 = vec![103.0, 0.0, 500.0, 96.0];
        assert!((f0_rmse(&a, &b).unwrap() - 12.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(vuv_error_rate(&a, &b).unwrap(), 50.0);
    }

    #[test]
    fn length_mismatch() {
        let a = random_features(10, 4, 4);
        let b = random_features(11, 4, 5);
        assert!(matches!(lsd(&a, &b), Err(MetricError::LengthMismatch(10, 11))));
        assert!(f0_rmse(&a, &b).is_err());
        let c = random_features(10, 5, 6);
        assert!(lsd(&a, &c).is_err());
    }

    #[test]
    fn ci95_values() {
        let r = ci95(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!((r.mean, r.half_width), (1.0, 0.0));
        let r = ci95(&[0.0, 2.0]).unwrap();
        assert!((r.mean - 1.0).abs() < 1e-15);
        assert!((r.half_width - 1.96).abs() < 1e-12);
        assert!(matches!(ci95(&[1.0]), Err(MetricError::TooFew { got: 1, needed: 2 })));
        // replicating the sample 4x halves the half-width (up to the n-1 correction)
        let base = [0.3, 1.7, 2.2, 0.9];
        let rep: Vec<f64> = base.iter().cycle().take(16).copied().collect();
        let (a, b) = (ci95(&base).unwrap(), ci95(&rep).unwrap());
        let correction = ((16.0 - 1.0) / 16.0 * 4.0 / 3.0f64).sqrt();
        assert!((b.half_width * 2.0 * correction - a.half_width).abs() < 1e-12);
    }

    #[test]
    fn report_layout() {
        let pairs: Vec<(FrameFeatures, FrameFeatures)> = (0..6)
            .map(|i| (random_features(30, 4, i), random_features(30, 4, 100 + i)))
            .collect();
        let refs: Vec<(&FrameFeatures, &FrameFeatures)> = pairs.iter().map(|(a, b)| (a, b)).collect();
        let (hi, lo) = group_report(&refs[..3], &refs[..3]).unwrap();
        assert_eq!(hi, lo);
        assert_eq!(hi.n_utterances, 3);
        let (_, lo) = group_report(&refs[..3], &refs[3..]).unwrap();
        let mut buf = vec![];
        write_report_csv(&[("high", &hi), ("low", &lo)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 9);
        assert!(text.starts_with("group,metric,mean,ci_half_width,n\nhigh,f0_rmse_hz,"));
        let table = format_table(&[("high", &hi), ("low", &lo)]);
        assert_eq!(table.lines().count(), 3);
        assert!(table.contains("±"));
    }

    #[test]
    fn spearman_values() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 40.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        // ties: ranks (1.5, 1.5, 3) vs (1, 2, 3)
        let r = spearman(&[5.0, 5.0, 9.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((r - 3f64.sqrt() / 2.0).abs() < 1e-12);
        assert!(spearman(&[1.0, 1.0], &[1.0, 2.0]).unwrap().is_nan());
    }

    proptest! {
        #[test]
        fn metrics_symmetric_nonnegative(s1 in 0u64..1000, s2 in 0u64..1000) {
            let a = random_features(40, 6, s1);
            let b = random_features(40, 6, s2);
            let fs: [fn(&FrameFeatures, &FrameFeatures) -> Result<f64, MetricError>; 4] = [f0_rmse, lsd, gain_rmse, vuv_error_rate];
            for f in fs {
                let (x, y) = (f(&a, &b).unwrap(), f(&b, &a).unwrap());
                prop_assert!(x >= 0.0);
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn ci_mean_is_arithmetic(v in proptest::collection::vec(-1e3f64..1e3, 2..100)) {
            let r = ci95(&v).unwrap();
            prop_assert!((r.mean - v.iter().sum::<f64>() / v.len() as f64).abs() < 1e-12);
            prop_assert!(r.half_width >= 0.0);
        }
    }
}
