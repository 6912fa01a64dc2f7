use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_originrank");

const STAGES: [&str; 10] = [
    "extract",
    "train-vae",
    "finetune-vae",
    "encode",
    "train-rank",
    "score",
    "select",
    "metrics",
    "histogram",
    "project",
];

const ARTIFACTS: [&str; 17] = [
    "config.json",
    "pooled.jsonl",
    "vae_pretrain.json",
    "vae.json",
    "latent.jsonl",
    "rank_model.json",
    "scores.csv",
    "selection.csv",
    "selection.json",
    "metrics.csv",
    "metrics.txt",
    "histogram.csv",
    "histogram.svg",
    "projection_pca.csv",
    "projection_pca.svg",
    "projection_tsne.csv",
    "projection_tsne.svg",
];

fn originrank(args: &[&str], config: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--config")
        .arg(config)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL: &str = r#"{
    "seed": 9,
    "paths": {"manifest": "corpus/manifest.jsonl", "work_dir": "run"},
    "pretrain": {"epochs": 40},
    "finetune": {"epochs": 40},
    "rank": {"iterations": 5000},
    "tsne": {"iterations": 300},
    "simulation": {"n_recorded": 40, "n_synthetic": 80}
}"#;

#[test]
fn stages_one_at_a_time_match_a_full_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = originrank(&["simulate"], &config);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("corpus/manifest.jsonl").exists());

    let full = dir.path().join("full");
    let out = originrank(&["run", "--out", full.to_str().unwrap()], &config);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    for stage in STAGES {
        let out = originrank(&[stage], &config);
        assert!(
            out.status.success(),
            "{stage}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let staged = dir.path().join("run");
    for name in ARTIFACTS {
        let a = std::fs::read(full.join(name)).unwrap();
        let b = std::fs::read(staged.join(name)).unwrap();
        assert!(a == b, "{name} differs between staged and full runs");
    }

    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(full.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 9);
    assert_eq!(summary["corpus"]["recorded"], 40);
    assert_eq!(summary["corpus"]["synthetic"], 80);

    let reseeded = dir.path().join("reseeded");
    let out = originrank(
        &["extract", "--seed", "10", "--out", reseeded.to_str().unwrap()],
        &config,
    );
    assert!(out.status.success());
    let written: serde_json::Value =
        serde_json::from_slice(&std::fs::read(reseeded.join("config.json")).unwrap()).unwrap();
    assert_eq!(written["seed"], 10);
}

#[test]
fn missing_config_file_exits_with_data_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = originrank(&["run"], &dir.path().join("absent.json"));
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn invalid_config_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), r#"{"histogram_bins": 1}"#);
    let out = originrank(&["run"], &config);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("histogram_bins"));
}

#[test]
fn missing_manifest_exits_with_data_code_and_names_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "{}");
    let out = originrank(&["extract"], &config);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scan"));
}

#[test]
fn stage_without_its_inputs_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"simulation": {"n_recorded": 2, "n_synthetic": 2, "duration_range": [0.3, 0.4]}}"#,
    );
    assert!(originrank(&["simulate"], &config).status.success());
    let out = originrank(&["score"], &config);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = Command::new(BIN).args(["run", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
