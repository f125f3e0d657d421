//! Seed-parallel execution and run-directory artifacts.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vcse_core::agent::config_hash;
use vcse_core::trainer::{train, Heatmap, RunMetrics, TrainError};

use crate::aggregate::{seed_dir, summarize, summary_csv, ConditionSummary};
use crate::config::ExperimentConfig;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub crate_version: String,
    /// SHA-256 of the config's compact JSON serialization.
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedOutcome {
    pub seed: u64,
    pub metrics: RunMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub runs: Vec<SeedOutcome>,
    pub summary: ConditionSummary,
    /// Visit counts summed over seeds, when recorded.
    pub heatmap: Option<Heatmap>,
    pub dir: Option<PathBuf>,
}

/// How to execute a config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Parent of the run directory; nothing is written when `None`.
    pub out_dir: Option<PathBuf>,
    /// Worker threads for seeds; `None` uses the rayon default.
    pub threads: Option<usize>,
    /// Print one line per finished seed to stderr.
    pub verbose: bool,
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn mkdir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("artifact serializes")
}

fn write_seed(dir: &Path, metrics: &RunMetrics) -> Result<(), CliError> {
    mkdir(dir)?;
    write(&dir.join("metrics.csv"), &metrics.metrics_csv())?;
    write(&dir.join("eval.csv"), &metrics.eval_csv())?;
    if let Some(h) = metrics.heatmap_json() {
        write(&dir.join("heatmap.json"), &h)?;
    }
    Ok(())
}

fn sum_heatmaps<'a>(maps: impl Iterator<Item = &'a Heatmap>) -> Option<Heatmap> {
    maps.fold(None, |acc: Option<Heatmap>, h| {
        Some(match acc {
            None => h.clone(),
            Some(mut a) => {
                for (ra, rh) in a.counts.iter_mut().zip(&h.counts) {
                    for (x, y) in ra.iter_mut().zip(rh) {
                        *x += y;
                    }
                }
                a
            }
        })
    })
}

/// Trains every seed of `cfg` and, when an output directory is set, writes
/// `<out>/<name>/` with the config, a manifest, per-seed metrics and a
/// summary.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentOutcome, CliError> {
    let spec = cfg.validate()?;
    let train_cfg = cfg.train_config();
    let dir = opts.out_dir.as_ref().map(|o| o.join(&cfg.name));
    let config_json = cfg.to_json();
    if let Some(d) = &dir {
        mkdir(d)?;
        write(&d.join("config.json"), &config_json)?;
    }

    let one = |seed: u64| -> Result<SeedOutcome, CliError> {
        let result = train(&spec, cfg.obs_mode, &train_cfg, seed, &mut |_| {});
        match result {
            Ok(metrics) => {
                if let Some(d) = &dir {
                    write_seed(&seed_dir(d, seed), &metrics)?;
                }
                if opts.verbose {
                    eprintln!(
                        "{} seed {seed}: final success {:.2} after {} steps",
                        cfg.name,
                        metrics.final_success().unwrap_or(0.0),
                        metrics.steps
                    );
                }
                Ok(SeedOutcome { seed, metrics })
            }
            Err(TrainError::Aborted { source, partial }) => {
                let err = CliError::Run { seed, source: *source };
                if let Some(d) = &dir {
                    let sd = seed_dir(d, seed);
                    write_seed(&sd, &partial)?;
                    write(&sd.join("error.json"), &to_json(&err.report()))?;
                }
                Err(err)
            }
            Err(source) => Err(CliError::Run { seed, source }),
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    let runs = pool.install(|| cfg.seeds.par_iter().map(|&s| one(s)).collect::<Result<Vec<_>, _>>())?;

    let evals: Vec<(u64, _)> = runs.iter().map(|r| (r.seed, r.metrics.evals.clone())).collect();
    let summary = summarize(cfg, &evals)?;
    let heatmap = sum_heatmaps(runs.iter().filter_map(|r| r.metrics.heatmap.as_ref()));
    if let Some(d) = &dir {
        let mut files = vec!["config.json".to_string(), "summary.json".into(), "summary.csv".into()];
        write(&d.join("summary.json"), &to_json(&summary))?;
        write(&d.join("summary.csv"), &summary_csv(std::slice::from_ref(&summary)))?;
        if let Some(h) = &heatmap {
            write(&d.join("heatmap.json"), &to_json(h))?;
            files.push("heatmap.json".into());
        }
        for r in &runs {
            let seed = format!("seed_{}", r.seed);
            files.push(format!("{seed}/metrics.csv"));
            files.push(format!("{seed}/eval.csv"));
            if r.metrics.heatmap.is_some() {
                files.push(format!("{seed}/heatmap.json"));
            }
        }
        let manifest = Manifest {
            name: cfg.name.clone(),
            crate_version: env!("CARGO_PKG_VERSION").into(),
            config_hash: config_hash(cfg),
            seeds: cfg.seeds.clone(),
            files,
        };
        write(&d.join("manifest.json"), &to_json(&manifest))?;
    }
    Ok(ExperimentOutcome { config: cfg.clone(), runs, summary, heatmap, dir })
}

/// Runs every condition in turn and writes one summary table per task.
pub fn run_suite(conditions: &[ExperimentConfig], opts: &RunOptions) -> Result<Vec<ExperimentOutcome>, CliError> {
    for c in conditions {
        c.validate()?;
    }
    let outcomes = conditions.iter().map(|c| run_experiment(c, opts)).collect::<Result<Vec<_>, _>>()?;
    if let Some(out) = &opts.out_dir {
        let mut tasks: Vec<_> = outcomes.iter().map(|o| o.config.task).collect();
        tasks.dedup();
        for task in tasks {
            let rows: Vec<ConditionSummary> =
                outcomes.iter().filter(|o| o.config.task == task).map(|o| o.summary.clone()).collect();
            let stem = format!("summary-{:?}{}", task.name, task.size);
            write(&out.join(format!("{stem}.json")), &to_json(&rows))?;
            write(&out.join(format!("{stem}.csv")), &summary_csv(&rows))?;
        }
    }
    Ok(outcomes)
}
