use thiserror::Error;

use crate::corpus::{ManifestError, SimError, WavError};
use crate::features::FeatureError;
use crate::histogram::HistogramError;
use crate::metrics::MetricError;
use crate::projection::ProjectionError;
use crate::rank::RankError;
use crate::selection::SelectionError;
use crate::vae::VaeError;

/// Coarse failure class, used by the command line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Numeric,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 2,
            ErrorCategory::Data => 3,
            ErrorCategory::Numeric => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Wav(#[from] WavError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Vae(#[from] VaeError),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Histogram(#[from] HistogramError),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("malformed artifact {path}: {reason}")]
    Artifact { path: String, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn artifact(path: impl AsRef<std::path::Path>, reason: impl ToString) -> Self {
        Error::Artifact {
            path: path.as_ref().display().to_string(),
            reason: reason.to_string(),
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            // keep the innermost stage name
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// The stage name attached by the pipeline, if any.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }

    /// Innermost error with stage wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self.root() {
            Error::Config(_) | Error::Simulation(SimError::InvalidConfig(_)) => ErrorCategory::Config,
            Error::Feature(FeatureError::InvalidConfig(_)) => ErrorCategory::Config,
            Error::Vae(VaeError::InvalidConfig(_)) => ErrorCategory::Config,
            Error::Rank(RankError::InvalidConfig(_)) => ErrorCategory::Config,
            Error::Selection(SelectionError::InvalidPolicy(_)) => ErrorCategory::Config,
            Error::Projection(ProjectionError::PerplexityTooLarge { .. }) => ErrorCategory::Config,
            Error::Histogram(HistogramError::TooFewBins(_)) => ErrorCategory::Config,
            Error::Vae(VaeError::NonFinite(_))
            | Error::Rank(RankError::NonFinite)
            | Error::Rank(RankError::NotConverged { .. })
            | Error::Rank(RankError::DegeneratePopulation)
            | Error::Projection(ProjectionError::DegenerateData)
            | Error::Projection(ProjectionError::NonFinite) => ErrorCategory::Numeric,
            _ => ErrorCategory::Data,
        }
    }
}
