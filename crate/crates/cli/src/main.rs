//! `originrank`: run the pipeline end to end or one stage at a time.
//!
//! Every stage reads its inputs from and writes its outputs to the run
//! directory, so stages can be scripted independently.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use originrank_core::corpus::simulate_corpus;
use originrank_core::pipeline::{files, run_pipeline};
use originrank_core::{PipelineConfig, Result, Run};

#[derive(Parser)]
#[command(
    name = "originrank",
    version,
    about = "Score synthetic speech by how close it sits to recordings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Pipeline config (JSON, schema cfg-1).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's global seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Run directory; for `simulate`, the corpus directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a simulated corpus (WAVs plus manifest).
    Simulate(Common),
    /// Frame features pooled per utterance.
    Extract(Common),
    /// Pretrain the VAE on recorded items.
    TrainVae(Common),
    /// Fine-tune the pretrained VAE on both classes.
    FinetuneVae(Common),
    /// Posterior statistics for every item.
    Encode(Common),
    /// Train the rank model on posterior statistics.
    TrainRank(Common),
    /// Originality per item.
    Score(Common),
    /// Apply the selection policy.
    Select(Common),
    /// Distortion of the high and low originality groups.
    Metrics(Common),
    /// PCA and t-SNE views of the latent means.
    Project(Common),
    /// Originality density histograms.
    Histogram(Common),
    /// Every stage, then the summary.
    Run(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Simulate(c)
            | Command::Extract(c)
            | Command::TrainVae(c)
            | Command::FinetuneVae(c)
            | Command::Encode(c)
            | Command::TrainRank(c)
            | Command::Score(c)
            | Command::Select(c)
            | Command::Metrics(c)
            | Command::Project(c)
            | Command::Histogram(c)
            | Command::Run(c) => c,
        }
    }
}

fn load_config(c: &Common) -> Result<PipelineConfig> {
    let mut config = PipelineConfig::load(&c.config)?;
    if let Some(seed) = c.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn simulate(config: &PipelineConfig, out: Option<PathBuf>) -> Result<()> {
    let dir = out.unwrap_or_else(|| {
        config
            .paths
            .manifest
            .parent()
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("."))
    });
    let sim = config.simulation.clone().unwrap_or_default();
    let index = simulate_corpus(&sim, config.simulate_seed(), &dir)?;
    println!("wrote {} utterances to {}", index.len(), dir.display());
    Ok(())
}

fn execute(command: &Command) -> Result<()> {
    let common = command.common();
    let mut config = load_config(common)?;
    if let Command::Simulate(_) = command {
        return simulate(&config, common.out.clone());
    }
    if let Some(out) = &common.out {
        config.paths.work_dir = out.clone();
    }
    if let Command::Run(_) = command {
        let outcome = run_pipeline(&config)?;
        println!(
            "run complete: {} (recorded {}, synthetic {} selected / {} discarded)",
            config.paths.work_dir.join(files::SUMMARY).display(),
            outcome.summary.selection.recorded,
            outcome.summary.selection.synthetic_selected,
            outcome.summary.selection.synthetic_discarded,
        );
        return Ok(());
    }

    let mut run = Run::open(&config)?;
    run.write_config()?;
    match command {
        Command::Extract(_) => {
            let pooled = run.extract()?;
            println!("pooled {} utterances", pooled.len());
        }
        Command::TrainVae(_) => {
            let pooled = run.load_pooled()?;
            run.pretrain(&pooled)?;
        }
        Command::FinetuneVae(_) => {
            let pretrained = run.load_vae(files::VAE_PRETRAIN)?;
            let pooled = run.load_pooled()?;
            run.finetune(&pretrained, &pooled)?;
        }
        Command::Encode(_) => {
            let model = run.load_vae(files::VAE)?;
            let pooled = run.load_pooled()?;
            run.encode(&model, &pooled)?;
        }
        Command::TrainRank(_) => {
            let latent = run.load_latent()?;
            let (_, summary) = run.train_rank(&latent)?;
            println!("training pairwise accuracy {:.4}", summary.train_accuracy);
        }
        Command::Score(_) => {
            let (model, _) = run.load_rank_model()?;
            let latent = run.load_latent()?;
            run.score(&model, &latent)?;
        }
        Command::Select(_) => {
            let (_, sha) = run.load_rank_model()?;
            let scored = run.load_scores()?;
            let m = run.select(&scored, &sha)?;
            println!("{} items selected", m.entries.iter().filter(|e| e.selected).count());
        }
        Command::Metrics(_) => {
            let scored = run.load_scores()?;
            if run.metrics(&scored)?.is_some() {
                print!(
                    "{}",
                    std::fs::read_to_string(run.path(files::METRICS_TABLE)).unwrap_or_default()
                );
            }
        }
        Command::Project(_) => {
            let latent = run.load_latent()?;
            run.project(&latent)?;
        }
        Command::Histogram(_) => {
            let scored = run.load_scores()?;
            run.histogram(&scored)?;
        }
        Command::Simulate(_) | Command::Run(_) => unreachable!("handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.category().exit_code() as u8)
        }
    }
}
