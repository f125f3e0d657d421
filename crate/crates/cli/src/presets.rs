//! Named experiment suites.
//!
//! Every preset trains the same desk-scale agent, a tabular actor-critic
//! over full one-hot observations on fixed layouts, so conditions differ
//! only in their exploration settings.

use serde::{Deserialize, Serialize};
use vcse_core::agent::{AgentConfig, Approximator};
use vcse_core::gridworld::{ObsMode, TaskKind};
use vcse_core::trainer::{BonusMode, ValueSource};

use crate::config::{ExperimentConfig, TaskSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[value(rename_all = "verbatim")]
pub enum Preset {
    /// SE vs VCSE on SimpleCrossingFixed 9×9 and LavaGap 7×7.
    Fig3,
    /// SE at three bonus scales against VCSE on SimpleCrossingFixed.
    Fig4BetaSweep,
    /// VCSE conditioned on critic estimates vs exact policy values.
    Fig7aValueOracle,
    /// VCSE vs the reward-conditional variant.
    Fig7bRCSE,
    /// VCSE with bonus batches of 256 and 1024 transitions.
    Fig7cBatchSize,
    /// Visitation heatmaps of SE and VCSE over the first 100k steps.
    Fig8Heatmap,
}

/// The agent every preset uses.
pub fn desk_agent() -> AgentConfig {
    AgentConfig { approximator: Approximator::Tabular, learning_rate: 0.05, ..AgentConfig::default() }
}

fn condition(preset: Preset, name: &str, task: TaskSpec, mode: BonusMode, beta: f64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(name, task);
    c.obs_mode = ObsMode::FullOneHot;
    c.agent = desk_agent();
    c.exploration.mode = mode;
    c.exploration.beta = beta;
    c.exploration.k = 5;
    c.preset = Some(preset);
    c
}

impl Preset {
    pub fn conditions(self) -> Vec<ExperimentConfig> {
        let crossing = TaskSpec::fixed(TaskKind::SimpleCrossingFixed, 9);
        let lava = TaskSpec::fixed(TaskKind::LavaGap, 7);
        let c = |name: &str, task, mode, beta| condition(self, name, task, mode, beta);
        match self {
            Preset::Fig3 => {
                let mut out = Vec::new();
                for (label, task) in [("crossing9", crossing), ("lavagap7", lava)] {
                    for (mode_label, mode) in [("se", BonusMode::SE), ("vcse", BonusMode::VCSE)] {
                        let mut cond = c(&format!("{label}-{mode_label}"), task, mode, 0.005);
                        cond.exploration.bonus_encoding = ObsMode::PartialGrid;
                        out.push(cond);
                    }
                }
                out
            }
            Preset::Fig4BetaSweep => vec![
                c("se-beta0.05", crossing, BonusMode::SE, 0.05),
                c("se-beta0.005", crossing, BonusMode::SE, 0.005),
                c("se-beta0.0005", crossing, BonusMode::SE, 0.0005),
                c("vcse-beta0.005", crossing, BonusMode::VCSE, 0.005),
            ],
            Preset::Fig7aValueOracle => {
                let critic = c("vcse-critic", crossing, BonusMode::VCSE, 0.005);
                let mut oracle = c("vcse-policy-evaluation", crossing, BonusMode::VCSE, 0.005);
                oracle.exploration.value_source = ValueSource::PolicyEvaluation;
                vec![critic, oracle]
            }
            Preset::Fig7bRCSE => vec![
                c("vcse", crossing, BonusMode::VCSE, 0.005),
                c("rcse", crossing, BonusMode::RCSE, 0.005),
            ],
            Preset::Fig7cBatchSize => [256, 1024]
                .into_iter()
                .map(|size| {
                    let mut cond = c(&format!("vcse-batch{size}"), crossing, BonusMode::VCSE, 0.005);
                    cond.agent.n_step = 64;
                    cond.exploration.bonus_batch_size = Some(size);
                    cond.rank_diagnostic = Some((256, 1024));
                    cond
                })
                .collect(),
            Preset::Fig8Heatmap => [("se", BonusMode::SE), ("vcse", BonusMode::VCSE)]
                .into_iter()
                .map(|(name, mode)| {
                    let mut cond = c(name, crossing, mode, 0.005);
                    cond.budget_steps = 100_000;
                    cond.heatmap_steps = Some(100_000);
                    cond.seeds = (0..4).collect();
                    cond
                })
                .collect(),
        }
    }
}
