//! The `vcse` binary end to end: configs, run directories, aggregation and
//! exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use vcse_cli::{aggregate_dirs, ExperimentConfig, Manifest, Preset, TaskSpec};
use vcse_core::gridworld::{ObsMode, TaskKind};
use vcse_core::trainer::BonusMode;

fn vcse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vcse"))
        .args(args)
        .env_remove("VCSE_OUT_DIR")
        .env_remove("VCSE_THREADS")
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr {text:?} is not a report: {e}"))
}

fn small_config(name: &str, task: TaskSpec) -> ExperimentConfig {
    let mut cfg = Preset::Fig7bRCSE.conditions().remove(0);
    cfg.name = name.into();
    cfg.task = task;
    cfg.preset = None;
    cfg.budget_steps = 2_000;
    cfg.eval_every = 1_000;
    cfg.seeds = vec![0, 1];
    cfg
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> PathBuf {
    let path = dir.join(format!("{}.json", cfg.name));
    std::fs::write(&path, cfg.to_json()).unwrap();
    path
}

#[test]
fn config_round_trips() {
    let mut cfgs: Vec<ExperimentConfig> = [
        Preset::Fig3,
        Preset::Fig4BetaSweep,
        Preset::Fig7aValueOracle,
        Preset::Fig7bRCSE,
        Preset::Fig7cBatchSize,
        Preset::Fig8Heatmap,
    ]
    .into_iter()
    .flat_map(Preset::conditions)
    .collect();
    let mut plain = ExperimentConfig::new("plain", TaskSpec::new(TaskKind::DoorKey, 8));
    plain.obs_mode = ObsMode::PartialGrid;
    plain.out_dir = Some("runs".into());
    plain.exploration.beta = 0.1 + 0.2;
    cfgs.push(plain);
    for cfg in cfgs {
        let once = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(once, cfg);
        assert_eq!(once.to_json(), cfg.to_json());
    }
}

#[test]
fn validate_accepts_good_and_names_bad_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let good = write_config(tmp.path(), &small_config("good", TaskSpec::fixed(TaskKind::SimpleCrossingFixed, 9)));
    let out = vcse(&["validate", good.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));

    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"task": {"name": "Empty", "size": 6}, "agent": {"learning_rat": 0.1}}"#).unwrap();
    let out = vcse(&["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let r = report(&out);
    assert_eq!(r["kind"], "config");
    assert!(r["field"].as_str().unwrap().starts_with("agent"), "{r}");
    assert!(r["message"].as_str().unwrap().contains("learning_rat"));

    let wrong_type = tmp.path().join("wrong.json");
    std::fs::write(&wrong_type, r#"{"task": {"name": "Empty", "size": 6}, "exploration": {"k": "five"}}"#).unwrap();
    let r = report(&vcse(&["validate", wrong_type.to_str().unwrap()]));
    assert_eq!(r["field"], "exploration.k");

    let inconsistent = tmp.path().join("k.json");
    let mut cfg = small_config("k", TaskSpec::fixed(TaskKind::SimpleCrossingFixed, 9));
    cfg.exploration.k = 500;
    std::fs::write(&inconsistent, cfg.to_json()).unwrap();
    assert_eq!(vcse(&["validate", inconsistent.to_str().unwrap()]).status.code(), Some(2));

    let missing = vcse(&["validate", tmp.path().join("nope.json").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(3));
    assert_eq!(report(&missing)["kind"], "io");
}

#[test]
fn run_writes_a_complete_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_config("heat", TaskSpec::fixed(TaskKind::SimpleCrossingFixed, 9));
    cfg.heatmap_steps = Some(1_500);
    let path = write_config(tmp.path(), &cfg);
    let runs = tmp.path().join("runs");
    let out = vcse(&["run", path.to_str().unwrap(), "--out", runs.to_str().unwrap(), "--seeds", "4,7", "--threads", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = runs.join("heat");
    let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.seeds, vec![4, 7]);
    assert_eq!(manifest.config_hash.len(), 64);
    for f in &manifest.files {
        assert!(dir.join(f).is_file(), "{f} listed but missing");
    }
    for f in ["config.json", "summary.json", "summary.csv", "heatmap.json", "seed_4/metrics.csv", "seed_7/heatmap.json"] {
        assert!(manifest.files.iter().any(|m| m == f), "{f} not in manifest");
    }
    let written = ExperimentConfig::load(&dir.join("config.json")).unwrap();
    assert_eq!(written.seeds, vec![4, 7]);
    let metrics = std::fs::read_to_string(dir.join("seed_4/metrics.csv")).unwrap();
    assert!(metrics.starts_with("step,episode,success,return,intrinsic_mean,beta\n"));
    let heat: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("heatmap.json")).unwrap()).unwrap();
    let total: u64 = heat["counts"].as_array().unwrap().iter().flat_map(|r| r.as_array().unwrap()).map(|c| c.as_u64().unwrap()).sum();
    assert_eq!(total, 2 * 1_500);
    let summary: Value = serde_json::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert_eq!(summary["seeds"], serde_json::json!([4, 7]));
}

#[test]
fn missing_output_directory_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), &small_config("nowhere", TaskSpec::fixed(TaskKind::Empty, 6)));
    let out = vcse(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&out)["field"], "out_dir");
}

#[test]
fn output_directory_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), &small_config("env", TaskSpec::fixed(TaskKind::Empty, 6)));
    let out = Command::new(env!("CARGO_BIN_EXE_vcse"))
        .args(["run", path.to_str().unwrap(), "--budget", "800"])
        .env("VCSE_OUT_DIR", tmp.path().join("from-env"))
        .env("VCSE_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let cfg = ExperimentConfig::load(&tmp.path().join("from-env/env/config.json")).unwrap();
    assert_eq!(cfg.budget_steps, 800);
}

#[test]
fn aggregate_summarizes_and_refuses_mixed_tasks() {
    let tmp = tempfile::tempdir().unwrap();
    let runs = tmp.path().join("runs");
    let mut cfgs = vec![
        small_config("a", TaskSpec::fixed(TaskKind::Empty, 6)),
        small_config("b", TaskSpec::fixed(TaskKind::Empty, 6)),
        small_config("c", TaskSpec::fixed(TaskKind::SimpleCrossingFixed, 9)),
    ];
    cfgs[1].exploration.mode = BonusMode::SE;
    for cfg in &cfgs {
        let path = write_config(tmp.path(), cfg);
        assert_eq!(vcse(&["run", path.to_str().unwrap(), "--out", runs.to_str().unwrap()]).status.code(), Some(0));
    }
    let dir = |n: &str| runs.join(n);
    let rows = aggregate_dirs(&[dir("a"), dir("b")]).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].seeds, vec![0, 1]);
    assert_eq!(rows[0].curve.len(), 2);

    let summary_dir = tmp.path().join("summary");
    let out = vcse(&["aggregate", dir("a").to_str().unwrap(), dir("b").to_str().unwrap(), "--out", summary_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(summary_dir.join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);

    let mixed = vcse(&["aggregate", dir("a").to_str().unwrap(), dir("c").to_str().unwrap()]);
    assert_eq!(mixed.status.code(), Some(2));
    assert!(report(&mixed)["message"].as_str().unwrap().contains("different tasks"));
}

#[test]
fn unknown_preset_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = vcse(&["preset", "Fig99", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn heatmap_preset_writes_one_heatmap_per_bonus() {
    let tmp = tempfile::tempdir().unwrap();
    let out = vcse(&["preset", "Fig8Heatmap", "--out", tmp.path().to_str().unwrap(), "--budget", "1600", "--seeds", "0..2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["se", "vcse"] {
        assert!(tmp.path().join(name).join("heatmap.json").is_file());
    }
    assert!(tmp.path().join("summary-SimpleCrossingFixed9.csv").is_file());
}
