//! Per-class density histograms of originality on [0, 1].

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;

#[derive(Debug, Error)]
pub enum HistogramError {
    #[error("class {0} has no scores")]
    EmptyClass(&'static str),
    #[error("need at least 2 bins, got {0}")]
    TooFewBins(usize),
    #[error("score {0} outside [0, 1]")]
    OutOfRange(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassHistogram {
    pub label: Label,
    pub counts: Vec<usize>,
    /// `count / (n * width)`.
    pub density: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bins: usize,
    pub classes: Vec<ClassHistogram>,
}

impl Histogram {
    pub fn width(&self) -> f64 {
        1.0 / self.bins as f64
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.bins).map(|b| b as f64 / self.bins as f64).collect()
    }

    /// Rows `class,bin_lo,bin_hi,count,density`.
    pub fn write_csv(&self, out: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["class", "bin_lo", "bin_hi", "count", "density"])?;
        let edges = self.edges();
        for c in &self.classes {
            for b in 0..self.bins {
                w.write_record([
                    c.label.as_str().to_string(),
                    edges[b].to_string(),
                    edges[b + 1].to_string(),
                    c.counts[b].to_string(),
                    c.density[b].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Equal-width bins over [0, 1]; a score of exactly 1 falls in the last bin.
pub fn histogram(scores_by_class: &[(Label, Vec<f64>)], bins: usize) -> Result<Histogram, HistogramError> {
    if bins < 2 {
        return Err(HistogramError::TooFewBins(bins));
    }
    let width = 1.0 / bins as f64;
    let classes = scores_by_class
        .iter()
        .map(|(label, scores)| {
            if scores.is_empty() {
                return Err(HistogramError::EmptyClass(label.as_str()));
            }
            let mut counts = vec![0usize; bins];
            for &s in scores {
                if !(0.0..=1.0).contains(&s) {
                    return Err(HistogramError::OutOfRange(s));
                }
                counts[((s * bins as f64) as usize).min(bins - 1)] += 1;
            }
            let n = scores.len() as f64;
            Ok(ClassHistogram {
                label: *label,
                density: counts.iter().map(|&c| c as f64 / (n * width)).collect(),
                counts,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(Histogram { bins, classes })
}
