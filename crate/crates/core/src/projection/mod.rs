//! Two-dimensional views of latent features: PCA and exact t-SNE.

mod pca;
mod tsne;

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use pca::{pca_project, top_eigenpairs};
pub use tsne::{tsne_project, tsne_project_detailed, TsneConfig, TsneOutcome};

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("perplexity {perplexity} must be in (1, {limit})")]
    PerplexityTooLarge { perplexity: f64, limit: f64 },
    #[error("data has no variance to project")]
    DegenerateData,
    #[error("non-finite embedding")]
    NonFinite,
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { got: usize, needed: usize },
    #[error("{ids} ids for {rows} feature rows")]
    IdMismatch { ids: usize, rows: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionMethod {
    Pca,
    Tsne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection2D {
    pub ids: Vec<String>,
    pub points: Vec<[f64; 2]>,
    pub method: ProjectionMethod,
    pub final_kl: Option<f64>,
}

impl Projection2D {
    /// Rows `id,label,x,y`; `labels` aligned with `ids`.
    pub fn write_csv(&self, labels: &[&str], out: impl Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["id", "label", "x", "y"])?;
        for ((id, p), l) in self.ids.iter().zip(&self.points).zip(labels) {
            w.write_record([id.as_str(), l, &p[0].to_string(), &p[1].to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_input(ids: &[String], features: &[Vec<f64>], min_points: usize) -> Result<(), ProjectionError> {
    if ids.len() != features.len() {
        return Err(ProjectionError::IdMismatch {
            ids: ids.len(),
            rows: features.len(),
        });
    }
    if features.len() < min_points {
        return Err(ProjectionError::TooFewPoints {
            got: features.len(),
            needed: min_points,
        });
    }
    let d = features[0].len();
    if features.iter().any(|x| x.len() != d) {
        return Err(ProjectionError::DegenerateData);
    }
    if features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(ProjectionError::NonFinite);
    }
    Ok(())
}
