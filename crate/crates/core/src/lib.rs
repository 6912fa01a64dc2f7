//! Originality scoring for synthetic speech corpora.
//!
//! Utterances are reduced to pooled acoustic statistics, encoded by a VAE, and
//! ranked by a pairwise linear model trained so recordings outrank synthetic
//! items. The normalized score drives subset selection and a distortion
//! comparison of the most and least original synthetic items.

pub mod config;
pub mod corpus;
pub mod error;
pub mod features;
pub mod histogram;
pub mod metrics;
pub mod pipeline;
pub mod plot;
pub mod projection;
pub mod rank;
pub mod rng;
pub mod selection;
pub mod vae;

pub use config::PipelineConfig;
pub use corpus::{CorpusIndex, Label, UtteranceRecord};
pub use error::{Error, ErrorCategory, Result};
pub use features::{FeatureConfig, FrameFeatures, PooledVector};
pub use metrics::MetricReport;
pub use pipeline::{run_pipeline, Run, RunOutcome, Summary};
pub use projection::{Projection2D, ProjectionMethod, TsneConfig};
pub use rank::{PairConfig, RankModel, RankTrainConfig, ScoredItem};
pub use selection::{SelectionManifest, SelectionPolicy};
pub use vae::{LatentStats, TrainConfig, VaeHyper, VaeModel};
