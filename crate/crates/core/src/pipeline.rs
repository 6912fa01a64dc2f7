//! Stage orchestration over a run directory.
//!
//! Each stage method computes its result in memory and writes its artifacts;
//! the `load_*` methods read them back so stages can also run one at a time.
//! Written artifacts are hashed, and `run_pipeline` collects the hashes into
//! `summary.json` together with the config hash.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::corpus::{load_wav, scan_corpus, CorpusIndex, Label, UtteranceRecord};
use crate::error::{Error, Result};
use crate::features::{pool_utterance, FeatureExtractor, FrameFeatures, PooledVector};
use crate::histogram::{histogram, Histogram};
use crate::metrics::{format_table, group_report, spearman, write_report_csv, MetricReport};
use crate::plot::{histogram_svg, scatter_svg};
use crate::projection::{pca_project, tsne_project_detailed, Projection2D, TsneOutcome};
use crate::rank::{fit_ranker, normalize_fit, read_scores_csv, write_scores_csv, RankModel, ScoredItem};
use crate::selection::{select, split_extremes, ScoredEntry, SelectionManifest};
use crate::vae::{finetune_vae, train_vae, LatentStats, TrainOutcome, VaeError, VaeModel};

pub const SUMMARY_SCHEMA: &str = "summary-1";

/// File names inside the run directory.
pub mod files {
    pub const CONFIG: &str = "config.json";
    pub const POOLED: &str = "pooled.jsonl";
    pub const VAE_PRETRAIN: &str = "vae_pretrain.json";
    pub const VAE: &str = "vae.json";
    pub const LATENT: &str = "latent.jsonl";
    pub const RANK_MODEL: &str = "rank_model.json";
    pub const SCORES: &str = "scores.csv";
    pub const SELECTION: &str = "selection.csv";
    pub const SELECTION_SIDECAR: &str = "selection.json";
    pub const METRICS: &str = "metrics.csv";
    pub const METRICS_TABLE: &str = "metrics.txt";
    pub const HISTOGRAM: &str = "histogram.csv";
    pub const HISTOGRAM_SVG: &str = "histogram.svg";
    pub const PCA: &str = "projection_pca.csv";
    pub const PCA_SVG: &str = "projection_pca.svg";
    pub const TSNE: &str = "projection_tsne.csv";
    pub const TSNE_SVG: &str = "projection_tsne.svg";
    pub const SUMMARY: &str = "summary.json";
}

trait InStage<T> {
    fn stage(self, name: &'static str) -> Result<T>;
}

impl<T, E: Into<Error>> InStage<T> for std::result::Result<T, E> {
    fn stage(self, name: &'static str) -> Result<T> {
        self.map_err(|e| e.into().in_stage(name))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn to_jsonl<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).expect("record serializes");
        out.push(b'\n');
    }
    out
}

fn from_jsonl<T: DeserializeOwned>(path: &Path, text: &str) -> Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::artifact(path, format!("line {}: {e}", i + 1))))
        .collect()
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    write(&mut buf).expect("in-memory csv write");
    buf
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub manifest_sha256: String,
    pub recorded: usize,
    pub synthetic: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeSummary {
    pub pretrain_items: usize,
    pub pretrain_final_loss: f64,
    pub finetune_items: usize,
    pub finetune_final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSummary {
    pub feature_dim: usize,
    pub n_ordered: usize,
    pub n_similar: usize,
    pub train_accuracy: f64,
    pub score_min: f64,
    pub score_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OriginalitySummary {
    pub recorded_mean: f64,
    pub synthetic_mean: f64,
    /// Spearman correlation with the manifest's degradation severity, when every synthetic item has one.
    pub severity_spearman: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub recorded: usize,
    pub synthetic_selected: usize,
    pub synthetic_discarded: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub fraction: f64,
    pub high: MetricReport,
    pub low: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSummary {
    pub tsne_first_kl: f64,
    pub tsne_final_kl: f64,
    pub tsne_entropy_misses: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: String,
    pub config_hash: String,
    pub seed: u64,
    pub corpus: CorpusSummary,
    /// stage -> file name -> sha256
    pub stages: BTreeMap<String, BTreeMap<String, String>>,
    pub vae: VaeSummary,
    pub rank: RankSummary,
    pub originality: OriginalitySummary,
    pub selection: SelectionSummary,
    /// Absent when the manifest has no base recordings to compare against.
    pub metrics: Option<GroupMetrics>,
    pub projection: ProjectionSummary,
}

/// Working state of one run directory.
pub struct Run {
    pub config: PipelineConfig,
    pub dir: PathBuf,
    pub index: CorpusIndex,
    manifest_sha256: String,
    hashes: BTreeMap<String, BTreeMap<String, String>>,
}

impl Run {
    /// Resolve stage seeds, scan the manifest and create the run directory.
    pub fn open(config: &PipelineConfig) -> Result<Self> {
        config.validate()?;
        let config = config.resolved();
        let manifest = &config.paths.manifest;
        let bytes = fs::read(manifest).map_err(|e| Error::io(manifest, e)).stage("scan")?;
        let index = scan_corpus(manifest).stage("scan")?;
        let dir = config.paths.work_dir.clone();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self {
            config,
            dir,
            index,
            manifest_sha256: sha256_hex(&bytes),
            hashes: BTreeMap::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&mut self, stage: &'static str, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e)).stage(stage)?;
        self.hashes
            .entry(stage.to_string())
            .or_default()
            .insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    fn read(&self, name: &str) -> Result<String> {
        let path = self.path(name);
        fs::read_to_string(&path).map_err(|e| Error::io(&path, e))
    }

    fn records_by_id(&self) -> HashMap<&str, &UtteranceRecord> {
        self.index.records.iter().map(|r| (r.id.as_str(), r)).collect()
    }

    /// Manifest labels for `ids`, failing on ids the manifest does not know.
    pub fn labels(&self, ids: &[&str]) -> Result<Vec<Label>> {
        let by_id = self.records_by_id();
        ids.iter()
            .map(|id| {
                by_id
                    .get(id)
                    .map(|r| r.label)
                    .ok_or_else(|| Error::artifact(&self.dir, format!("id {id} is not in the manifest")))
            })
            .collect()
    }

    fn extractors(&self) -> Result<BTreeMap<u32, FeatureExtractor>> {
        let mut out = BTreeMap::new();
        for r in &self.index.records {
            if !out.contains_key(&r.sample_rate) {
                out.insert(
                    r.sample_rate,
                    FeatureExtractor::new(&self.config.features, r.sample_rate)?,
                );
            }
        }
        Ok(out)
    }

    fn frames(
        &self,
        extractors: &BTreeMap<u32, FeatureExtractor>,
        rel: &str,
        sample_rate: u32,
    ) -> Result<FrameFeatures> {
        let path = self.index.resolve(rel);
        let wav = load_wav(&path).map_err(|e| Error::artifact(&path, e))?;
        if wav.sample_rate != sample_rate {
            return Err(Error::artifact(
                &path,
                format!(
                    "sample rate {} differs from the manifest's {sample_rate}",
                    wav.sample_rate
                ),
            ));
        }
        Ok(extractors[&sample_rate].extract(&wav)?)
    }

    /// Frame features and pooled vectors for every manifest item, in manifest order.
    pub fn extract(&mut self) -> Result<Vec<PooledVector>> {
        let extractors = self.extractors().stage("extract")?;
        let pooled: Vec<PooledVector> = self
            .index
            .records
            .par_iter()
            .map(|r| -> Result<PooledVector> {
                let frames = self.frames(&extractors, &r.path, r.sample_rate)?;
                Ok(PooledVector {
                    id: r.id.clone(),
                    values: pool_utterance(&frames)?,
                })
            })
            .collect::<Result<_>>()
            .stage("extract")?;
        self.write("extract", files::POOLED, &to_jsonl(&pooled))?;
        log::info!("extracted {} utterances", pooled.len());
        Ok(pooled)
    }

    pub fn load_pooled(&self) -> Result<Vec<PooledVector>> {
        from_jsonl(&self.path(files::POOLED), &self.read(files::POOLED)?)
    }

    fn split_by_class(&self, pooled: &[PooledVector]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let ids: Vec<&str> = pooled.iter().map(|p| p.id.as_str()).collect();
        let labels = self.labels(&ids)?;
        let (mut rec, mut syn) = (vec![], vec![]);
        for (p, l) in pooled.iter().zip(labels) {
            match l {
                Label::Recorded => rec.push(p.values.clone()),
                Label::Synthetic => syn.push(p.values.clone()),
            }
        }
        Ok((rec, syn))
    }

    /// VAE trained on recorded items only.
    pub fn pretrain(&mut self, pooled: &[PooledVector]) -> Result<TrainOutcome> {
        let (rec, _) = self.split_by_class(pooled).stage("pretrain")?;
        if rec.is_empty() {
            return Err(Error::Vae(VaeError::MissingClass("recorded")).in_stage("pretrain"));
        }
        let out = train_vae(&rec, self.config.vae, &self.config.pretrain).stage("pretrain")?;
        self.write("pretrain", files::VAE_PRETRAIN, out.model.to_json().as_bytes())?;
        log::info!("pretrained VAE on {} recorded items", rec.len());
        Ok(out)
    }

    /// Continue training the pretrained VAE on recorded and synthetic items.
    pub fn finetune(&mut self, pretrained: &VaeModel, pooled: &[PooledVector]) -> Result<TrainOutcome> {
        let (rec, syn) = self.split_by_class(pooled).stage("finetune")?;
        let out = finetune_vae(pretrained, &rec, &syn, &self.config.finetune).stage("finetune")?;
        self.write("finetune", files::VAE, out.model.to_json().as_bytes())?;
        log::info!("fine-tuned VAE on {} items", rec.len() + syn.len());
        Ok(out)
    }

    pub fn load_vae(&self, name: &str) -> Result<VaeModel> {
        let path = self.path(name);
        VaeModel::from_json(&self.read(name)?).map_err(|e| Error::artifact(&path, e))
    }

    /// Posterior statistics for every pooled vector.
    pub fn encode(&mut self, model: &VaeModel, pooled: &[PooledVector]) -> Result<Vec<LatentStats>> {
        let latent: Vec<LatentStats> = pooled
            .par_iter()
            .map(|p| model.encode(&p.id, &p.values))
            .collect::<std::result::Result<_, _>>()
            .stage("encode")?;
        self.write("encode", files::LATENT, &to_jsonl(&latent))?;
        Ok(latent)
    }

    pub fn load_latent(&self) -> Result<Vec<LatentStats>> {
        from_jsonl(&self.path(files::LATENT), &self.read(files::LATENT)?)
    }

    /// Rank model on `mu ++ logvar`, with normalization bounds fitted over all items.
    pub fn train_rank(&mut self, latent: &[LatentStats]) -> Result<(RankModel, RankSummary)> {
        let ids: Vec<&str> = latent.iter().map(|l| l.id.as_str()).collect();
        let labels = self.labels(&ids).stage("rank")?;
        let features: Vec<Vec<f64>> = latent.iter().map(LatentStats::flattened).collect();
        let fit = fit_ranker(
            &features,
            &labels,
            &self.config.pairs,
            &self.config.rank,
            self.config.pair_seed(),
        )
        .stage("rank")?;
        let scores: Vec<f64> = features
            .iter()
            .map(|x| fit.model.score(x))
            .collect::<std::result::Result<_, _>>()
            .stage("rank")?;
        let model = normalize_fit(&fit.model, &scores).stage("rank")?;
        self.write("rank", files::RANK_MODEL, model.to_json().as_bytes())?;
        let (lo, hi) = model.bounds().stage("rank")?;
        log::info!("rank model trained, pairwise accuracy {:.4}", fit.train_accuracy);
        let summary = RankSummary {
            feature_dim: model.feature_dim,
            n_ordered: fit.n_ordered,
            n_similar: fit.n_similar,
            train_accuracy: fit.train_accuracy,
            score_min: lo,
            score_max: hi,
        };
        Ok((model, summary))
    }

    pub fn load_rank_model(&self) -> Result<(RankModel, String)> {
        let text = self.read(files::RANK_MODEL)?;
        let model = RankModel::from_json(&text).map_err(|e| Error::artifact(self.path(files::RANK_MODEL), e))?;
        Ok((model, sha256_hex(text.as_bytes())))
    }

    pub fn score(&mut self, model: &RankModel, latent: &[LatentStats]) -> Result<Vec<ScoredItem>> {
        let ids: Vec<&str> = latent.iter().map(|l| l.id.as_str()).collect();
        let labels = self.labels(&ids).stage("score")?;
        let scored: Vec<ScoredItem> = latent
            .par_iter()
            .zip(labels)
            .map(|(l, label)| {
                let x = l.flattened();
                Ok(ScoredItem {
                    id: l.id.clone(),
                    label,
                    raw_score: model.score(&x)?,
                    originality: model.originality(&x)?,
                })
            })
            .collect::<std::result::Result<_, crate::rank::RankError>>()
            .stage("score")?;
        self.write("score", files::SCORES, &csv_bytes(|b| write_scores_csv(&scored, b)))?;
        Ok(scored)
    }

    pub fn load_scores(&self) -> Result<Vec<ScoredItem>> {
        let path = self.path(files::SCORES);
        let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
        read_scores_csv(file).map_err(|e| Error::artifact(&path, e))
    }

    pub fn select(&mut self, scored: &[ScoredItem], model_sha256: &str) -> Result<SelectionManifest> {
        let entries: Vec<ScoredEntry> = scored.iter().map(ScoredEntry::from).collect();
        let manifest = select(&entries, self.config.selection, Some(model_sha256)).stage("select")?;
        self.write("select", files::SELECTION, &csv_bytes(|b| manifest.write_csv(b)))?;
        self.write("select", files::SELECTION_SIDECAR, manifest.sidecar_json().as_bytes())?;
        Ok(manifest)
    }

    /// Distortion of the high and low originality groups against their base
    /// recordings. `None` when no synthetic item names a base recording.
    pub fn metrics(&mut self, scored: &[ScoredItem]) -> Result<Option<GroupMetrics>> {
        let by_id = self.records_by_id();
        let synthetic: Vec<ScoredEntry> = scored
            .iter()
            .filter(|s| s.label == Label::Synthetic)
            .map(ScoredEntry::from)
            .collect();
        let with_base = synthetic
            .iter()
            .filter(|s| by_id.get(s.id.as_str()).is_some_and(|r| r.base_path.is_some()))
            .count();
        if with_base == 0 {
            log::warn!("manifest has no base recordings; skipping distortion metrics");
            return Ok(None);
        }
        let fraction = self.config.extremes_fraction;
        let (high, low) = split_extremes(&synthetic, fraction).stage("metrics")?;
        let extractors = self.extractors().stage("metrics")?;
        let load_group = |group: &[ScoredEntry]| -> Result<Vec<(FrameFeatures, FrameFeatures)>> {
            group
                .par_iter()
                .map(|e| {
                    let r = by_id
                        .get(e.id.as_str())
                        .ok_or_else(|| Error::artifact(&self.dir, format!("id {} is not in the manifest", e.id)))?;
                    let base = r.base_path.as_deref().ok_or_else(|| {
                        Error::artifact(
                            &self.index.root,
                            format!("synthetic item {} has no base recording", r.id),
                        )
                    })?;
                    Ok((
                        self.frames(&extractors, base, r.sample_rate)?,
                        self.frames(&extractors, &r.path, r.sample_rate)?,
                    ))
                })
                .collect()
        };
        let (hf, lf) = (load_group(&high).stage("metrics")?, load_group(&low).stage("metrics")?);
        let (high_report, low_report) = group_report(&pair_refs(&hf), &pair_refs(&lf)).stage("metrics")?;
        let groups = [("high", &high_report), ("low", &low_report)];
        self.write("metrics", files::METRICS, &csv_bytes(|b| write_report_csv(&groups, b)))?;
        self.write("metrics", files::METRICS_TABLE, format_table(&groups).as_bytes())?;
        Ok(Some(GroupMetrics {
            fraction,
            high: high_report,
            low: low_report,
        }))
    }

    pub fn histogram(&mut self, scored: &[ScoredItem]) -> Result<Histogram> {
        let class = |l: Label| {
            scored
                .iter()
                .filter(|s| s.label == l)
                .map(|s| s.originality)
                .collect::<Vec<_>>()
        };
        let h = histogram(
            &[
                (Label::Recorded, class(Label::Recorded)),
                (Label::Synthetic, class(Label::Synthetic)),
            ],
            self.config.histogram_bins,
        )
        .stage("histogram")?;
        self.write("histogram", files::HISTOGRAM, &csv_bytes(|b| h.write_csv(b)))?;
        self.write(
            "histogram",
            files::HISTOGRAM_SVG,
            histogram_svg(&h, "originality density").as_bytes(),
        )?;
        Ok(h)
    }

    /// PCA and t-SNE views of the posterior means.
    pub fn project(&mut self, latent: &[LatentStats]) -> Result<(Projection2D, TsneOutcome)> {
        let ids: Vec<String> = latent.iter().map(|l| l.id.clone()).collect();
        let id_refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let labels: Vec<&str> = self
            .labels(&id_refs)
            .stage("project")?
            .into_iter()
            .map(Label::as_str)
            .collect();
        let mu: Vec<Vec<f64>> = latent.iter().map(|l| l.mu.clone()).collect();
        let pca = pca_project(&ids, &mu).stage("project")?;
        let tsne = tsne_project_detailed(&ids, &mu, &self.config.tsne).stage("project")?;
        self.write("project", files::PCA, &csv_bytes(|b| pca.write_csv(&labels, b)))?;
        self.write(
            "project",
            files::PCA_SVG,
            scatter_svg(&pca, &labels, "PCA of latent means").as_bytes(),
        )?;
        self.write(
            "project",
            files::TSNE,
            &csv_bytes(|b| tsne.projection.write_csv(&labels, b)),
        )?;
        self.write(
            "project",
            files::TSNE_SVG,
            scatter_svg(&tsne.projection, &labels, "t-SNE of latent means").as_bytes(),
        )?;
        Ok((pca, tsne))
    }

    /// Write the resolved config, minus paths, as `config.json`.
    pub fn write_config(&mut self) -> Result<()> {
        let mut v = serde_json::to_value(&self.config).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("paths");
        }
        let text = serde_json::to_string_pretty(&v).expect("config serializes");
        self.write("config", files::CONFIG, text.as_bytes())
    }
}

/// Everything a full run produced, kept in memory for callers that want more than the files.
pub struct RunOutcome {
    pub summary: Summary,
    pub pooled: Vec<PooledVector>,
    pub labels: Vec<Label>,
    /// Manifest severity per item (recorded items have none).
    pub degradation: Vec<Option<f64>>,
    pub pretrained: VaeModel,
    pub finetuned: VaeModel,
    pub latent: Vec<LatentStats>,
    pub rank_model: RankModel,
    pub scored: Vec<ScoredItem>,
    pub selection: SelectionManifest,
    pub histogram: Histogram,
    pub pca: Projection2D,
    pub tsne: TsneOutcome,
}

fn pair_refs(g: &[(FrameFeatures, FrameFeatures)]) -> Vec<(&FrameFeatures, &FrameFeatures)> {
    g.iter().map(|(a, b)| (a, b)).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<RunOutcome> {
    let mut run = Run::open(config)?;
    run.write_config()?;
    let pooled = run.extract()?;
    let pretrain = run.pretrain(&pooled)?;
    let finetune = run.finetune(&pretrain.model, &pooled)?;
    let latent = run.encode(&finetune.model, &pooled)?;
    let (rank_model, rank_summary) = run.train_rank(&latent)?;
    let rank_sha = sha256_hex(rank_model.to_json().as_bytes());
    let scored = run.score(&rank_model, &latent)?;
    let selection = run.select(&scored, &rank_sha)?;
    let metrics = run.metrics(&scored)?;
    let hist = run.histogram(&scored)?;
    let (pca, tsne) = run.project(&latent)?;

    let by_id = run.records_by_id();
    let records: Vec<&UtteranceRecord> = pooled.iter().map(|p| by_id[p.id.as_str()]).collect();
    let labels: Vec<Label> = records.iter().map(|r| r.label).collect();
    let degradation: Vec<Option<f64>> = records.iter().map(|r| r.degradation).collect();
    drop(by_id);

    let orig = |l: Label| {
        scored
            .iter()
            .filter(|s| s.label == l)
            .map(|s| s.originality)
            .collect::<Vec<_>>()
    };
    let syn_pairs: Vec<(f64, Option<f64>)> = scored
        .iter()
        .zip(&degradation)
        .filter(|(s, _)| s.label == Label::Synthetic)
        .map(|(s, d)| (s.originality, *d))
        .collect();
    let severity_spearman = if syn_pairs.len() >= 2 && syn_pairs.iter().all(|(_, d)| d.is_some()) {
        let (o, d): (Vec<f64>, Vec<f64>) = syn_pairs.iter().map(|(o, d)| (*o, d.unwrap_or(0.0))).unzip();
        spearman(&o, &d).ok().filter(|r| r.is_finite())
    } else {
        None
    };
    let final_loss = |o: &TrainOutcome| o.loss_curve.last().map_or(f64::NAN, |e| e.loss);
    let n_rec = labels.iter().filter(|&&l| l == Label::Recorded).count();

    let summary = Summary {
        schema: SUMMARY_SCHEMA.to_string(),
        config_hash: run.config.hash(),
        seed: run.config.seed,
        corpus: CorpusSummary {
            manifest_sha256: run.manifest_sha256.clone(),
            recorded: n_rec,
            synthetic: labels.len() - n_rec,
        },
        stages: run.hashes.clone(),
        vae: VaeSummary {
            pretrain_items: n_rec,
            pretrain_final_loss: final_loss(&pretrain),
            finetune_items: labels.len(),
            finetune_final_loss: final_loss(&finetune),
        },
        rank: rank_summary,
        originality: OriginalitySummary {
            recorded_mean: mean(&orig(Label::Recorded)),
            synthetic_mean: mean(&orig(Label::Synthetic)),
            severity_spearman,
        },
        selection: SelectionSummary {
            recorded: selection.count(Label::Recorded, true),
            synthetic_selected: selection.count(Label::Synthetic, true),
            synthetic_discarded: selection.count(Label::Synthetic, false),
        },
        metrics,
        projection: ProjectionSummary {
            tsne_first_kl: tsne.first_kl,
            tsne_final_kl: tsne.projection.final_kl.unwrap_or(f64::NAN),
            tsne_entropy_misses: tsne.entropy_misses,
        },
    };
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    let path = run.path(files::SUMMARY);
    fs::write(&path, text.as_bytes()).map_err(|e| Error::io(&path, e))?;
    log::info!("run complete: {}", run.dir.display());

    Ok(RunOutcome {
        summary,
        pooled,
        labels,
        degradation,
        pretrained: pretrain.model,
        finetuned: finetune.model,
        latent,
        rank_model,
        scored,
        selection,
        histogram: hist,
        pca,
        tsne,
    })
}
