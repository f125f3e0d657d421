//! Rollout collection, on-policy bonus batches, A2C updates and metrics.

mod bonus;
mod metrics;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{policy_evaluation, policy_table, Agent, AgentConfig, AgentError, Rollout};
use crate::entropy::EstimatorError;
use crate::gridworld::{Action, GridEnv, GridError, MapSpec, ObsMode, TransitionModel};

pub use bonus::{
    batch_size_rank_correlation, chunked_vcse, compose_bonus, normalize_values, spearman, BonusMode,
    ExplorationConfig, Minibatch, ValueSource,
};
pub use metrics::{EpisodeRecord, EvalRecord, Heatmap, RunMetrics};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("VCSE needs value estimates for every transition")]
    MissingValues,
    #[error("position ({x}, {y}) outside the {width}x{height} map")]
    OutOfBounds { x: usize, y: usize, width: usize, height: usize },
    #[error("transition from policy version {got} in a batch for version {expected}")]
    OffPolicy { expected: u64, got: u64 },
    #[error("state reached by the environment is missing from the tabular model")]
    UnknownState,
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("run aborted after {} steps: {source}", partial.steps)]
    Aborted {
        #[source]
        source: Box<TrainError>,
        partial: Box<RunMetrics>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Environments stepped in lockstep; a rollout is `n_envs × n_step`.
    pub n_envs: usize,
    pub budget_steps: u64,
    pub eval_every: u64,
    pub eval_episodes: usize,
    /// Record (x, y) visits over the first this-many steps.
    pub heatmap_steps: Option<u64>,
    /// Track VCSE rank agreement between these two bonus batch sizes.
    pub rank_diagnostic: Option<(usize, usize)>,
    pub agent: AgentConfig,
    pub exploration: ExplorationConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_envs: 16,
            budget_steps: 200_000,
            eval_every: 5_000,
            eval_episodes: 20,
            heatmap_steps: None,
            rank_diagnostic: None,
            agent: AgentConfig::default(),
            exploration: ExplorationConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn rollout_len(&self) -> usize {
        self.n_envs * self.agent.n_step
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.n_envs == 0 {
            return Err(TrainError::Config("n_envs must be at least 1".into()));
        }
        if self.eval_every == 0 || self.eval_episodes == 0 {
            return Err(TrainError::Config("eval_every and eval_episodes must be positive".into()));
        }
        self.agent.validate()?;
        self.exploration.validate(self.rollout_len())?;
        if let Some((a, b)) = self.rank_diagnostic {
            if self.exploration.mode == BonusMode::None {
                return Err(TrainError::Config("rank_diagnostic needs an exploration bonus".into()));
            }
            let k = self.exploration.k;
            if a <= k || b <= k || a.max(b) > self.rollout_len() {
                return Err(TrainError::Config(format!(
                    "rank_diagnostic sizes ({a}, {b}) must exceed k = {k} and fit in a rollout of {}",
                    self.rollout_len()
                )));
            }
        }
        Ok(())
    }
}

/// Reported after every update.
#[derive(Debug, Clone, PartialEq)]
pub struct Progress<'a> {
    pub steps: u64,
    pub updates: u64,
    pub episodes: u64,
    /// Set when an evaluation just finished.
    pub eval: Option<&'a EvalRecord>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

/// Greedy evaluation episodes, one per layout seed. A fixed layout makes
/// every greedy episode identical, so it is played once.
pub fn evaluate(agent: &Agent, spec: &MapSpec, mode: ObsMode, seeds: &[u64], step: u64) -> Result<EvalRecord, TrainError> {
    let mut env = GridEnv::new(spec.clone(), mode)?;
    let distinct = if spec.randomize_layout { seeds.len() } else { 1 };
    let (mut wins, mut total) = (0usize, 0.0);
    for &seed in &seeds[..distinct] {
        let mut obs = env.reset(seed)?;
        loop {
            let t = env.step(Action::from_index(agent.greedy(&obs.data)?)?)?;
            if t.reached_goal {
                wins += 1;
                total += t.extrinsic_reward;
            }
            if env.is_finished() {
                break;
            }
            obs = t.next_obs;
        }
    }
    let n = distinct as f64;
    Ok(EvalRecord { step, success_rate: wins as f64 / n, mean_return: total / n })
}

struct EpisodeAcc {
    ret: f64,
    intrinsic: f64,
    len: u64,
}

/// Runs A2C with the configured exploration bonus for `budget_steps`
/// environment steps. `(spec, cfg, seed)` determine the result exactly.
pub fn train(
    spec: &MapSpec,
    obs_mode: ObsMode,
    cfg: &TrainConfig,
    seed: u64,
    on_progress: &mut dyn FnMut(&Progress),
) -> Result<RunMetrics, TrainError> {
    cfg.validate()?;
    spec.validate()?;
    cfg.agent.check_observation(obs_mode, spec.randomize_layout)?;
    let exp = &cfg.exploration;
    if cfg.heatmap_steps.is_some() && spec.randomize_layout {
        return Err(TrainError::Config("heatmaps need a fixed layout".into()));
    }
    let model = match (exp.mode, exp.value_source) {
        (BonusMode::VCSE, ValueSource::PolicyEvaluation) => Some(TransitionModel::build(spec, 1.0).map_err(|e| {
            TrainError::Config(format!("policy-evaluation values need a fixed layout: {e}"))
        })?),
        _ => None,
    };

    let mut metrics = RunMetrics {
        heatmap: cfg.heatmap_steps.map(|_| Heatmap::new(spec.width, spec.height, spec.rows())),
        ..Default::default()
    };
    if cfg.budget_steps == 0 {
        return Ok(metrics);
    }
    let mut run = Run::new(spec, obs_mode, cfg, seed, model)?;
    match run.go(&mut metrics, on_progress) {
        Ok(()) => Ok(metrics),
        Err(e) => Err(TrainError::Aborted { source: Box::new(e), partial: Box::new(metrics) }),
    }
}

struct Run<'a> {
    spec: &'a MapSpec,
    mode: ObsMode,
    cfg: &'a TrainConfig,
    model: Option<TransitionModel>,
    agent: Agent,
    envs: Vec<GridEnv>,
    obs: Vec<Vec<f64>>,
    acc: Vec<EpisodeAcc>,
    act_rng: ChaCha8Rng,
    layout_rng: ChaCha8Rng,
    eval_seeds: Vec<u64>,
}

/// Per-transition data gathered before the bonus is known.
struct Collected {
    obs: Vec<Vec<f64>>,
    bonus_states: Vec<Vec<f64>>,
    values: Vec<f64>,
    model_states: Vec<usize>,
    versions: Vec<u64>,
    actions: Vec<usize>,
    rewards: Vec<f64>,
    dones: Vec<bool>,
    goals: Vec<bool>,
}

impl<'a> Run<'a> {
    fn new(spec: &'a MapSpec, mode: ObsMode, cfg: &'a TrainConfig, seed: u64, model: Option<TransitionModel>) -> Result<Self, TrainError> {
        let agent = Agent::new(cfg.agent.clone(), mode.len(spec.width, spec.height), seed)?;
        let mut layout_rng = stream(seed, 2);
        let mut envs = Vec::with_capacity(cfg.n_envs);
        let mut obs = Vec::with_capacity(cfg.n_envs);
        for _ in 0..cfg.n_envs {
            let mut env = GridEnv::new(spec.clone(), mode)?;
            obs.push(env.reset(layout_rng.random())?.data);
            envs.push(env);
        }
        let mut eval_rng = stream(seed, 3);
        let eval_seeds = (0..cfg.eval_episodes).map(|_| eval_rng.random()).collect();
        Ok(Self {
            spec,
            mode,
            cfg,
            model,
            agent,
            acc: (0..cfg.n_envs).map(|_| EpisodeAcc { ret: 0.0, intrinsic: 0.0, len: 0 }).collect(),
            envs,
            obs,
            act_rng: stream(seed, 1),
            layout_rng,
            eval_seeds,
        })
    }

    fn go(&mut self, metrics: &mut RunMetrics, on_progress: &mut dyn FnMut(&Progress)) -> Result<(), TrainError> {
        let cfg = self.cfg;
        let mut next_eval = cfg.eval_every;
        while metrics.steps < cfg.budget_steps {
            let collected = self.collect(metrics)?;
            let intrinsic = self.bonus(&collected, metrics.updates)?;
            let total: Vec<f64> =
                collected.rewards.iter().zip(&intrinsic).map(|(e, i)| e + cfg.exploration.beta * i).collect();
            self.finish_episodes(&collected, &intrinsic, metrics);

            let rollout = Rollout {
                n_envs: cfg.n_envs,
                n_steps: cfg.agent.n_step,
                obs: collected.obs,
                actions: collected.actions,
                total_rewards: total,
                extrinsic_rewards: collected.rewards,
                dones: collected.dones,
                last_obs: self.obs.clone(),
            };
            self.agent.a2c_update(&rollout)?;
            metrics.steps += rollout.obs.len() as u64;
            metrics.updates += 1;

            let mut eval = None;
            if metrics.steps >= next_eval || metrics.steps >= cfg.budget_steps {
                while next_eval <= metrics.steps {
                    next_eval += cfg.eval_every;
                }
                if let Some(sizes) = cfg.rank_diagnostic {
                    metrics.rank_correlations.push(batch_size_rank_correlation(
                        &collected.bonus_states,
                        &collected.values,
                        cfg.exploration.k,
                        sizes,
                    )?);
                }
                metrics.evals.push(evaluate(&self.agent, self.spec, self.mode, &self.eval_seeds, metrics.steps)?);
                eval = metrics.evals.last();
            }
            on_progress(&Progress { steps: metrics.steps, updates: metrics.updates, episodes: metrics.episodes.len() as u64, eval });
        }
        Ok(())
    }

    fn collect(&mut self, metrics: &mut RunMetrics) -> Result<Collected, TrainError> {
        let cfg = self.cfg;
        let n = cfg.rollout_len();
        let want_bonus = cfg.exploration.mode != BonusMode::None;
        let version = metrics.updates;
        let mut c = Collected {
            obs: Vec::with_capacity(n),
            bonus_states: Vec::with_capacity(n),
            values: Vec::with_capacity(n),
            model_states: Vec::with_capacity(n),
            versions: Vec::with_capacity(n),
            actions: Vec::with_capacity(n),
            rewards: Vec::with_capacity(n),
            dones: Vec::with_capacity(n),
            goals: Vec::with_capacity(n),
        };
        for t in 0..cfg.agent.n_step {
            for e in 0..cfg.n_envs {
                let step_number = metrics.steps + (t * cfg.n_envs + e) as u64 + 1;
                let env = &mut self.envs[e];
                let out = self.agent.forward(&self.obs[e])?;
                let action = crate::agent::sample_categorical(&out.probabilities(), self.act_rng.random::<f64>());
                let pose = env.pose();
                if let (Some(h), Some(limit)) = (metrics.heatmap.as_mut(), cfg.heatmap_steps) {
                    if step_number <= limit {
                        h.record(pose.x, pose.y)?;
                    }
                }
                if want_bonus {
                    c.bonus_states.push(if cfg.exploration.bonus_encoding == self.mode {
                        self.obs[e].clone()
                    } else {
                        env.observe_as(cfg.exploration.bonus_encoding).data
                    });
                }
                if let Some(model) = &self.model {
                    c.model_states.push(model.state_of(env.cells(), &pose).ok_or(TrainError::UnknownState)?);
                }
                c.values.push(out.v_ext);
                c.versions.push(version);
                let tr = env.step(Action::from_index(action)?)?;
                let done = tr.terminated || tr.truncated;
                c.obs.push(std::mem::replace(
                    &mut self.obs[e],
                    if done { env.reset(self.layout_rng.random())?.data } else { tr.next_obs.data },
                ));
                c.actions.push(action);
                c.rewards.push(tr.extrinsic_reward);
                c.dones.push(done);
                c.goals.push(tr.reached_goal);
            }
        }
        Ok(c)
    }

    fn bonus(&self, c: &Collected, version: u64) -> Result<Vec<f64>, TrainError> {
        let exp = &self.cfg.exploration;
        let n = c.rewards.len();
        if exp.mode == BonusMode::None {
            return Ok(vec![0.0; n]);
        }
        if let Some(&got) = c.versions.iter().find(|&&v| v != version) {
            return Err(TrainError::OffPolicy { expected: version, got });
        }
        let values = match &self.model {
            Some(model) => {
                let policy = policy_table(&self.agent, model, self.mode)?;
                let v = policy_evaluation(model, &policy, self.cfg.agent.gamma, 1e-6)?.values;
                c.model_states.iter().map(|&s| v[s]).collect()
            }
            None => c.values.clone(),
        };
        let size = exp.bonus_batch_size.unwrap_or(n);
        let mut bounds: Vec<(usize, usize)> = (0..n).step_by(size).map(|s| (s, (s + size).min(n))).collect();
        // a tail too small for a k-th neighbour joins the previous chunk
        if let [.., prev, last] = bounds.as_slice() {
            if last.1 - last.0 <= exp.k {
                let merged = (prev.0, last.1);
                bounds.truncate(bounds.len() - 2);
                bounds.push(merged);
            }
        }
        let mut out = Vec::with_capacity(n);
        for (start, end) in bounds {
            let mut mb = Minibatch {
                states: c.bonus_states[start..end].to_vec(),
                extrinsic_rewards: c.rewards[start..end].to_vec(),
                raw_values: Some(values[start..end].to_vec()),
                ..Default::default()
            };
            compose_bonus(&mut mb, exp)?;
            out.extend(mb.intrinsic_rewards);
        }
        Ok(out)
    }

    fn finish_episodes(&mut self, c: &Collected, intrinsic: &[f64], metrics: &mut RunMetrics) {
        let n_envs = self.cfg.n_envs;
        for i in 0..c.rewards.len() {
            let e = i % n_envs;
            let acc = &mut self.acc[e];
            acc.ret += c.rewards[i];
            acc.intrinsic += intrinsic[i];
            acc.len += 1;
            if c.dones[i] {
                metrics.episodes.push(EpisodeRecord {
                    step: metrics.steps + i as u64 + 1,
                    episode: metrics.episodes.len() as u64 + 1,
                    success: c.goals[i],
                    ret: acc.ret,
                    intrinsic_mean: acc.intrinsic / acc.len as f64,
                    beta: self.cfg.exploration.beta,
                });
                *acc = EpisodeAcc { ret: 0.0, intrinsic: 0.0, len: 0 };
            }
        }
    }
}
