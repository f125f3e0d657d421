//! Across-seed statistics and summary tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vcse_core::trainer::EvalRecord;

use crate::config::{ExperimentConfig, TaskSpec};
use crate::error::CliError;
use crate::presets::Preset;

/// Interquartile mean: the mean after dropping `⌊n/4⌋` values from each end
/// of the sorted sample.
pub fn iqm(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "iqm of an empty sample");
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let cut = s.len() / 4;
    let mid = &s[cut..s.len() - cut];
    mid.iter().sum::<f64>() / mid.len() as f64
}

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub iqm: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        Self { iqm: iqm(xs), std: std_dev(xs) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: u64,
    pub success: Stat,
    #[serde(rename = "return")]
    pub ret: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub name: String,
    pub task: TaskSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    pub seeds: Vec<u64>,
    pub final_success: Stat,
    pub final_return: Stat,
    /// Last evaluation of each seed, in seed order.
    pub final_success_per_seed: Vec<f64>,
    /// Statistics at every evaluation step shared by all seeds.
    pub curve: Vec<CurvePoint>,
}

/// Summarizes the evaluation histories of one condition.
pub fn summarize(cfg: &ExperimentConfig, runs: &[(u64, Vec<EvalRecord>)]) -> Result<ConditionSummary, CliError> {
    if runs.is_empty() {
        return Err(CliError::config(format!("condition {} has no completed seeds", cfg.name)));
    }
    let mut finals = Vec::with_capacity(runs.len());
    for (seed, evals) in runs {
        let last = evals
            .last()
            .ok_or_else(|| CliError::Artifact(format!("seed {seed} of {} has no evaluations", cfg.name)))?;
        finals.push((last.success_rate, last.mean_return));
    }
    let mut by_step: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for (_, evals) in runs {
        for e in evals {
            by_step.entry(e.step).or_default().push((e.success_rate, e.mean_return));
        }
    }
    let curve = by_step
        .into_iter()
        .filter(|(_, v)| v.len() == runs.len())
        .map(|(step, v)| {
            let (s, r): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            CurvePoint { step, success: Stat::of(&s), ret: Stat::of(&r) }
        })
        .collect();
    let (s, r): (Vec<f64>, Vec<f64>) = finals.into_iter().unzip();
    Ok(ConditionSummary {
        name: cfg.name.clone(),
        task: cfg.task,
        preset: cfg.preset,
        seeds: runs.iter().map(|(seed, _)| *seed).collect(),
        final_success: Stat::of(&s),
        final_return: Stat::of(&r),
        final_success_per_seed: s,
        curve,
    })
}

pub fn summary_csv(rows: &[ConditionSummary]) -> String {
    let mut out = String::from(
        "name,task,size,seeds,final_success_iqm,final_success_std,final_return_iqm,final_return_std\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:?},{},{},{},{},{},{}",
            r.name,
            r.task.name,
            r.task.size,
            r.seeds.len(),
            r.final_success.iqm,
            r.final_success.std,
            r.final_return.iqm,
            r.final_return.std
        );
    }
    out
}

/// Parses an `eval.csv` written by a run.
pub fn parse_eval_csv(text: &str, path: &Path) -> Result<Vec<EvalRecord>, CliError> {
    let bad = |line: usize| CliError::Artifact(format!("{}: malformed line {line}", path.display()));
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "step,success_rate,mean_return")) => {}
        _ => return Err(bad(1)),
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 3 {
                return Err(bad(i + 1));
            }
            Ok(EvalRecord {
                step: f[0].parse().map_err(|_| bad(i + 1))?,
                success_rate: f[1].parse().map_err(|_| bad(i + 1))?,
                mean_return: f[2].parse().map_err(|_| bad(i + 1))?,
            })
        })
        .collect()
}

pub fn seed_dir(run_dir: &Path, seed: u64) -> PathBuf {
    run_dir.join(format!("seed_{seed}"))
}

/// Reads a finished run directory back into a summary.
pub fn summarize_dir(dir: &Path) -> Result<ConditionSummary, CliError> {
    let cfg = ExperimentConfig::load(&dir.join("config.json"))?;
    let mut runs = Vec::new();
    for &seed in &cfg.seeds {
        let path = seed_dir(dir, seed).join("eval.csv");
        match std::fs::read_to_string(&path) {
            Ok(text) => runs.push((seed, parse_eval_csv(&text, &path)?)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(CliError::io(path, e)),
        }
    }
    summarize(&cfg, &runs)
}

/// One summary row per run directory. All directories must share a task.
pub fn aggregate_dirs(dirs: &[PathBuf]) -> Result<Vec<ConditionSummary>, CliError> {
    if dirs.is_empty() {
        return Err(CliError::config("no run directories given"));
    }
    let rows = dirs.iter().map(|d| summarize_dir(d)).collect::<Result<Vec<_>, _>>()?;
    let task = |s: &ConditionSummary| (s.task.name, s.task.size);
    if let Some(other) = rows.iter().find(|r| task(r) != task(&rows[0])) {
        return Err(CliError::config(format!(
            "refusing to aggregate different tasks: {} is {:?} {} but {} is {:?} {}",
            rows[0].name, rows[0].task.name, rows[0].task.size, other.name, other.task.name, other.task.size
        )));
    }
    Ok(rows)
}
