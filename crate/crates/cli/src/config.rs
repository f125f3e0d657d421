//! Experiment configs: parsing, validation and conversion to training configs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vcse_core::agent::AgentConfig;
use vcse_core::gridworld::{builtin_task, MapSpec, ObsMode, TaskKind};
use vcse_core::trainer::{ExplorationConfig, TrainConfig};

use crate::error::CliError;
use crate::presets::Preset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub name: TaskKind,
    pub size: usize,
    /// Overrides the task's own layout randomization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub randomize_layout: Option<bool>,
}

impl TaskSpec {
    pub fn new(name: TaskKind, size: usize) -> Self {
        Self { name, size, randomize_layout: None }
    }

    pub fn fixed(name: TaskKind, size: usize) -> Self {
        Self { name, size, randomize_layout: Some(false) }
    }

    pub fn map(&self) -> Result<MapSpec, CliError> {
        let mut spec = builtin_task(self.name, self.size)
            .map_err(|e| CliError::Config { field: Some("task".into()), message: e.to_string() })?;
        if let Some(r) = self.randomize_layout {
            spec.randomize_layout = r;
        }
        Ok(spec)
    }
}

/// One experimental condition run over a list of seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Condition label; also the directory name inside a preset.
    #[serde(default = "default_name")]
    pub name: String,
    pub task: TaskSpec,
    #[serde(default = "default_obs_mode")]
    pub obs_mode: ObsMode,
    #[serde(default)]
    pub agent: AgentConfig,
    #[serde(default)]
    pub exploration: ExplorationConfig,
    #[serde(default = "default_budget")]
    pub budget_steps: u64,
    #[serde(default = "default_n_envs")]
    pub n_envs: usize,
    #[serde(default = "default_eval_every")]
    pub eval_every: u64,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heatmap_steps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_diagnostic: Option<(usize, usize)>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// The preset this condition belongs to, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
}

fn default_name() -> String {
    "run".into()
}

fn default_obs_mode() -> ObsMode {
    ObsMode::FullOneHot
}

fn default_budget() -> u64 {
    TrainConfig::default().budget_steps
}

fn default_n_envs() -> usize {
    TrainConfig::default().n_envs
}

fn default_eval_every() -> u64 {
    TrainConfig::default().eval_every
}

fn default_eval_episodes() -> usize {
    TrainConfig::default().eval_episodes
}

fn default_seeds() -> Vec<u64> {
    (0..8).collect()
}

impl ExperimentConfig {
    pub fn new(name: impl Into<String>, task: TaskSpec) -> Self {
        let t = TrainConfig::default();
        Self {
            name: name.into(),
            task,
            obs_mode: default_obs_mode(),
            agent: t.agent,
            exploration: t.exploration,
            budget_steps: t.budget_steps,
            n_envs: t.n_envs,
            eval_every: t.eval_every,
            eval_episodes: t.eval_episodes,
            heatmap_steps: t.heatmap_steps,
            rank_diagnostic: t.rank_diagnostic,
            seeds: default_seeds(),
            out_dir: None,
            preset: None,
        }
    }

    /// Parses JSON, naming the offending field on failure.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Config {
                field: (path != ".").then_some(path),
                message: e.inner().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            n_envs: self.n_envs,
            budget_steps: self.budget_steps,
            eval_every: self.eval_every,
            eval_episodes: self.eval_episodes,
            heatmap_steps: self.heatmap_steps,
            rank_diagnostic: self.rank_diagnostic,
            agent: self.agent.clone(),
            exploration: self.exploration.clone(),
        }
    }

    /// Everything that can be checked without running.
    pub fn validate(&self) -> Result<MapSpec, CliError> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name == "." || self.name == ".." {
            return Err(CliError::Config {
                field: Some("name".into()),
                message: format!("name {:?} is not usable as a directory name", self.name),
            });
        }
        if self.seeds.is_empty() {
            return Err(CliError::Config { field: Some("seeds".into()), message: "at least one seed is required".into() });
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(CliError::Config { field: Some("seeds".into()), message: "seeds must be distinct".into() });
        }
        if self.budget_steps == 0 {
            return Err(CliError::Config {
                field: Some("budget_steps".into()),
                message: "budget_steps must be positive".into(),
            });
        }
        let spec = self.task.map()?;
        let train = self.train_config();
        let field = |f: &str| Some(f.to_string());
        train.validate().map_err(|e| CliError::Config { field: None, message: e.to_string() })?;
        self.agent
            .check_observation(self.obs_mode, spec.randomize_layout)
            .map_err(|e| CliError::Config { field: field("agent"), message: e.to_string() })?;
        if self.heatmap_steps.is_some() && spec.randomize_layout {
            return Err(CliError::Config {
                field: field("heatmap_steps"),
                message: "heatmaps need a fixed layout".into(),
            });
        }
        Ok(spec)
    }
}
