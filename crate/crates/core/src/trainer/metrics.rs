//! Per-run records and their file formats.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::TrainError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// Environment steps taken by the run when the episode ended.
    pub step: u64,
    pub episode: u64,
    pub success: bool,
    /// Undiscounted extrinsic return.
    pub ret: f64,
    pub intrinsic_mean: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub step: u64,
    pub success_rate: f64,
    pub mean_return: f64,
}

/// Visit counts over the map, `counts[y][x]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub width: usize,
    pub height: usize,
    pub rows: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl Heatmap {
    pub fn new(width: usize, height: usize, rows: Vec<String>) -> Self {
        Self { width, height, rows, counts: vec![vec![0; width]; height] }
    }

    pub fn record(&mut self, x: usize, y: usize) -> Result<(), TrainError> {
        if x >= self.width || y >= self.height {
            return Err(TrainError::OutOfBounds { x, y, width: self.width, height: self.height });
        }
        self.counts[y][x] += 1;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Share of visits to cells with `x > column`.
    pub fn mass_right_of(&self, column: usize) -> f64 {
        let right: u64 = self.counts.iter().map(|row| row.iter().skip(column + 1).sum::<u64>()).sum();
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            right as f64 / total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunMetrics {
    pub episodes: Vec<EpisodeRecord>,
    pub evals: Vec<EvalRecord>,
    pub heatmap: Option<Heatmap>,
    pub steps: u64,
    pub updates: u64,
    /// Batch-size rank correlations, when requested.
    pub rank_correlations: Vec<f64>,
}

impl RunMetrics {
    /// Success rate of the last evaluation.
    pub fn final_success(&self) -> Option<f64> {
        self.evals.last().map(|e| e.success_rate)
    }

    pub fn final_return(&self) -> Option<f64> {
        self.evals.last().map(|e| e.mean_return)
    }

    pub fn metrics_csv(&self) -> String {
        let mut s = String::from("step,episode,success,return,intrinsic_mean,beta\n");
        for e in &self.episodes {
            let _ = writeln!(s, "{},{},{},{},{},{}", e.step, e.episode, u8::from(e.success), e.ret, e.intrinsic_mean, e.beta);
        }
        s
    }

    pub fn eval_csv(&self) -> String {
        let mut s = String::from("step,success_rate,mean_return\n");
        for e in &self.evals {
            let _ = writeln!(s, "{},{},{}", e.step, e.success_rate, e.mean_return);
        }
        s
    }

    pub fn heatmap_json(&self) -> Option<String> {
        self.heatmap.as_ref().map(|h| serde_json::to_string_pretty(h).expect("heatmap serializes"))
    }
}
