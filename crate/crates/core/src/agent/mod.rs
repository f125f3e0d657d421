//! Advantage actor-critic with a total critic and an extrinsic critic.
//!
//! The policy and the total critic are trained on the combined reward; the
//! extrinsic critic regresses returns of the task reward alone and its error
//! is kept out of any features it shares with the policy.

mod checkpoint;
mod mlp;
mod policy_eval;
mod tabular;

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridworld::ObsMode;

pub use checkpoint::{config_hash, Checkpoint, CHECKPOINT_VERSION};
pub use policy_eval::{bellman_residual, policy_evaluation, policy_table, PolicyValues};

use mlp::Mlp;
use tabular::{Table, ENTRY};

pub const NUM_ACTIONS: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error("invalid agent config: {0}")]
    InvalidConfig(String),
    #[error("observation has {got} features, the agent expects {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("non-finite {what} during update (policy loss {policy_loss}, total value loss {value_loss_total}, extrinsic value loss {value_loss_ext})")]
    NonFinite { what: &'static str, policy_loss: f64, value_loss_total: f64, value_loss_ext: f64 },
    #[error("malformed batch: {0}")]
    MalformedBatch(String),
    #[error("policy evaluation did not converge: residual {residual} after {iterations} sweeps")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("policy table has {got} rows for {expected} states")]
    PolicySize { expected: usize, got: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("operation needs the {0} approximator")]
    WrongApproximator(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Approximator {
    /// One entry per distinct observation.
    Tabular,
    /// tanh MLP with the given hidden widths.
    TinyMlp { hidden: Vec<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtrinsicCritic {
    /// A head on the shared trunk, trained behind a stop-gradient.
    SharedTrunk,
    /// A separate network with its own trunk.
    Separate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Optimizer {
    Sgd,
    RmsProp { alpha: f64, eps: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub approximator: Approximator,
    pub extrinsic_critic: ExtrinsicCritic,
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub gamma: f64,
    pub n_step: usize,
    /// Global gradient-norm clip; `None` disables clipping.
    pub max_grad_norm: Option<f64>,
    /// Multiplies observations before the first layer.
    pub input_scale: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            approximator: Approximator::TinyMlp { hidden: vec![64, 64] },
            extrinsic_critic: ExtrinsicCritic::SharedTrunk,
            optimizer: Optimizer::RmsProp { alpha: 0.99, eps: 1e-8 },
            learning_rate: 7e-4,
            entropy_coef: 0.01,
            value_coef: 0.5,
            gamma: 0.99,
            n_step: 5,
            max_grad_norm: Some(0.5),
            input_scale: 1.0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: String| Err(AgentError::InvalidConfig(m));
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.learning_rate) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if !(self.entropy_coef.is_finite() && self.entropy_coef >= 0.0) {
            return bad(format!("entropy_coef must be non-negative, got {}", self.entropy_coef));
        }
        if !(self.value_coef.is_finite() && self.value_coef >= 0.0) {
            return bad(format!("value_coef must be non-negative, got {}", self.value_coef));
        }
        if self.n_step == 0 {
            return bad("n_step must be at least 1".into());
        }
        if let Some(c) = self.max_grad_norm {
            if !positive(c) {
                return bad(format!("max_grad_norm must be positive, got {c}"));
            }
        }
        if !positive(self.input_scale) {
            return bad(format!("input_scale must be positive, got {}", self.input_scale));
        }
        if let Optimizer::RmsProp { alpha, eps } = self.optimizer {
            if !(0.0..1.0).contains(&alpha) || !positive(eps) {
                return bad(format!("rmsprop needs alpha in [0, 1) and eps > 0, got {alpha} and {eps}"));
            }
        }
        if let Approximator::TinyMlp { hidden } = &self.approximator {
            if hidden.contains(&0) {
                return bad("hidden layer widths must be positive".into());
            }
        }
        Ok(())
    }

    /// Tables only make sense when observations identify states exactly.
    pub fn check_observation(&self, mode: ObsMode, randomized_layout: bool) -> Result<(), AgentError> {
        let ambiguous = match mode {
            ObsMode::FullOneHot => false,
            ObsMode::AgentXY => randomized_layout,
            ObsMode::PartialGrid => true,
        };
        if self.approximator == Approximator::Tabular && ambiguous {
            return Err(AgentError::InvalidConfig(
                "the tabular approximator needs FullOneHot observations, or AgentXY on a fixed layout".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyOutput {
    pub action_logits: [f64; NUM_ACTIONS],
    pub v_total: f64,
    pub v_ext: f64,
}

impl PolicyOutput {
    pub fn probabilities(&self) -> [f64; NUM_ACTIONS] {
        softmax(&self.action_logits)
    }
}

pub fn softmax(logits: &[f64; NUM_ACTIONS]) -> [f64; NUM_ACTIONS] {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p = logits.map(|z| (z - m).exp());
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= s);
    p
}

pub fn log_softmax(logits: &[f64; NUM_ACTIONS]) -> [f64; NUM_ACTIONS] {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    logits.map(|z| z - lse)
}

/// One on-policy rollout from `n_envs` environments over `n_steps` steps.
/// Per-step vectors are indexed `t * n_envs + e`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub n_envs: usize,
    pub n_steps: usize,
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub total_rewards: Vec<f64>,
    pub extrinsic_rewards: Vec<f64>,
    /// The episode ended with this step; no bootstrapping across it.
    pub dones: Vec<bool>,
    /// Observation after the last step, per environment.
    pub last_obs: Vec<Vec<f64>>,
}

/// Targets for one gradient step.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateBatch {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub advantages: Vec<f64>,
    pub returns_total: Vec<f64>,
    pub returns_ext: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss_total: f64,
    pub value_loss_ext: f64,
    pub entropy: f64,
    /// Norm before clipping.
    pub grad_norm: f64,
}

impl UpdateStats {
    /// The scalar being minimized.
    pub fn loss(&self, cfg: &AgentConfig) -> f64 {
        self.policy_loss - cfg.entropy_coef * self.entropy + cfg.value_coef * self.value_loss_total + self.value_loss_ext
    }
}

/// Discounted n-step returns, bootstrapped from `bootstrap[e]` unless the
/// episode ended inside the rollout.
pub fn n_step_returns(rewards: &[f64], dones: &[bool], bootstrap: &[f64], gamma: f64) -> Vec<f64> {
    let n_envs = bootstrap.len();
    let n_steps = rewards.len() / n_envs;
    let mut out = vec![0.0; rewards.len()];
    for e in 0..n_envs {
        let mut ret = bootstrap[e];
        for t in (0..n_steps).rev() {
            let i = t * n_envs + e;
            if dones[i] {
                ret = 0.0;
            }
            ret = rewards[i] + gamma * ret;
            out[i] = ret;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Params {
    Mlp(Mlp),
    Tabular(Table),
}

#[derive(Debug, Clone, PartialEq)]
enum OptimState {
    None,
    Dense(Vec<f64>),
    Sparse(HashMap<tabular::Key, [f64; ENTRY]>),
}

enum Gradient {
    Dense(Vec<f64>),
    Sparse(HashMap<tabular::Key, [f64; ENTRY]>),
}

impl Gradient {
    fn norm(&self) -> f64 {
        match self {
            Gradient::Dense(g) => g.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Gradient::Sparse(g) => g.values().flatten().map(|x| x * x).sum::<f64>().sqrt(),
        }
    }

    fn scale(&mut self, s: f64) {
        match self {
            Gradient::Dense(g) => g.iter_mut().for_each(|x| *x *= s),
            Gradient::Sparse(g) => g.values_mut().flatten().for_each(|x| *x *= s),
        }
    }
}

fn optimizer_step(theta: &mut [f64], grad: &[f64], state: Option<&mut [f64]>, opt: Optimizer, lr: f64) {
    match (opt, state) {
        (Optimizer::RmsProp { alpha, eps }, Some(sq)) => {
            for ((w, &g), s) in theta.iter_mut().zip(grad).zip(sq.iter_mut()) {
                *s = alpha * *s + (1.0 - alpha) * g * g;
                *w -= lr * g / (s.sqrt() + eps);
            }
        }
        _ => {
            for (w, &g) in theta.iter_mut().zip(grad) {
                *w -= lr * g;
            }
        }
    }
}

/// Policy, total critic and extrinsic critic with their optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    config: AgentConfig,
    obs_dim: usize,
    params: Params,
    optim: OptimState,
}

impl Agent {
    /// Randomly initialized agent; the weights depend only on `seed`.
    pub fn new(config: AgentConfig, obs_dim: usize, seed: u64) -> Result<Self, AgentError> {
        let mut agent = Self::zeroed(config, obs_dim)?;
        if let Params::Mlp(m) = &mut agent.params {
            m.randomize(&mut ChaCha8Rng::seed_from_u64(seed));
        }
        Ok(agent)
    }

    /// All weights zero: uniform policy and zero values everywhere.
    pub fn zeroed(config: AgentConfig, obs_dim: usize) -> Result<Self, AgentError> {
        config.validate()?;
        if obs_dim == 0 {
            return Err(AgentError::InvalidConfig("observation dimension must be positive".into()));
        }
        let params = match &config.approximator {
            Approximator::Tabular => Params::Tabular(Table::default()),
            Approximator::TinyMlp { hidden } => {
                Params::Mlp(Mlp::new(obs_dim, hidden, config.extrinsic_critic, config.input_scale))
            }
        };
        let optim = match (&config.optimizer, &params) {
            (Optimizer::Sgd, _) => OptimState::None,
            (_, Params::Mlp(m)) => OptimState::Dense(vec![0.0; m.num_params()]),
            (_, Params::Tabular(_)) => OptimState::Sparse(HashMap::new()),
        };
        Ok(Self { config, obs_dim, params, optim })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    fn check(&self, obs: &[f64]) -> Result<(), AgentError> {
        if obs.len() != self.obs_dim {
            return Err(AgentError::ShapeMismatch { expected: self.obs_dim, got: obs.len() });
        }
        Ok(())
    }

    pub fn forward(&self, obs: &[f64]) -> Result<PolicyOutput, AgentError> {
        self.check(obs)?;
        Ok(match &self.params {
            Params::Mlp(m) => m.forward(obs),
            Params::Tabular(t) => t.forward(obs),
        })
    }

    /// Samples an action from the softmax policy with one uniform draw.
    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<usize, AgentError> {
        let p = self.forward(obs)?.probabilities();
        Ok(sample_categorical(&p, rng.random::<f64>()))
    }

    /// Most probable action, lowest index on ties.
    pub fn greedy(&self, obs: &[f64]) -> Result<usize, AgentError> {
        let z = self.forward(obs)?.action_logits;
        Ok((0..NUM_ACTIONS).fold(0, |best, a| if z[a] > z[best] { a } else { best }))
    }

    /// Flat MLP parameters.
    pub fn mlp_params(&self) -> Result<&[f64], AgentError> {
        match &self.params {
            Params::Mlp(m) => Ok(&m.theta),
            Params::Tabular(_) => Err(AgentError::WrongApproximator("TinyMlp")),
        }
    }

    pub fn mlp_params_mut(&mut self) -> Result<&mut [f64], AgentError> {
        match &mut self.params {
            Params::Mlp(m) => Ok(&mut m.theta),
            Params::Tabular(_) => Err(AgentError::WrongApproximator("TinyMlp")),
        }
    }

    /// Indices of MLP parameters used only by the extrinsic critic.
    pub fn extrinsic_param_range(&self) -> Result<std::ops::Range<usize>, AgentError> {
        match &self.params {
            Params::Mlp(m) => Ok(m.ext_only_range()),
            Params::Tabular(_) => Err(AgentError::WrongApproximator("TinyMlp")),
        }
    }

    /// Overwrites the table entry of `obs`.
    pub fn write_table_entry(&mut self, obs: &[f64], out: PolicyOutput) -> Result<(), AgentError> {
        self.check(obs)?;
        match &mut self.params {
            Params::Tabular(t) => {
                let mut e = [0.0; ENTRY];
                e[..NUM_ACTIONS].copy_from_slice(&out.action_logits);
                e[NUM_ACTIONS] = out.v_total;
                e[NUM_ACTIONS + 1] = out.v_ext;
                t.entries.insert(tabular::key(obs), e);
                Ok(())
            }
            Params::Mlp(_) => Err(AgentError::WrongApproximator("Tabular")),
        }
    }

    pub fn table_len(&self) -> Option<usize> {
        match &self.params {
            Params::Tabular(t) => Some(t.entries.len()),
            Params::Mlp(_) => None,
        }
    }

    /// Turns a rollout into returns and advantages for both critics.
    pub fn prepare(&self, rollout: &Rollout) -> Result<UpdateBatch, AgentError> {
        let n = rollout.n_envs * rollout.n_steps;
        let lens = [rollout.obs.len(), rollout.actions.len(), rollout.total_rewards.len(), rollout.extrinsic_rewards.len(), rollout.dones.len()];
        if n == 0 || lens.iter().any(|&l| l != n) || rollout.last_obs.len() != rollout.n_envs {
            return Err(AgentError::MalformedBatch(format!(
                "{} envs x {} steps does not match field lengths {lens:?} / {}",
                rollout.n_envs,
                rollout.n_steps,
                rollout.last_obs.len()
            )));
        }
        let mut boot_total = Vec::with_capacity(rollout.n_envs);
        let mut boot_ext = Vec::with_capacity(rollout.n_envs);
        for o in &rollout.last_obs {
            let out = self.forward(o)?;
            boot_total.push(out.v_total);
            boot_ext.push(out.v_ext);
        }
        let gamma = self.config.gamma;
        let returns_total = n_step_returns(&rollout.total_rewards, &rollout.dones, &boot_total, gamma);
        let returns_ext = n_step_returns(&rollout.extrinsic_rewards, &rollout.dones, &boot_ext, gamma);
        let advantages = rollout
            .obs
            .iter()
            .zip(&returns_total)
            .map(|(o, r)| Ok(r - self.forward(o)?.v_total))
            .collect::<Result<Vec<_>, AgentError>>()?;
        Ok(UpdateBatch { obs: rollout.obs.clone(), actions: rollout.actions.clone(), advantages, returns_total, returns_ext })
    }

    fn loss_and_gradient(&self, batch: &UpdateBatch) -> Result<(UpdateStats, Gradient), AgentError> {
        let n = batch.obs.len();
        if n == 0 || [batch.actions.len(), batch.advantages.len(), batch.returns_total.len(), batch.returns_ext.len()].iter().any(|&l| l != n) {
            return Err(AgentError::MalformedBatch("update batch fields differ in length".into()));
        }
        if let Some(&a) = batch.actions.iter().find(|&&a| a >= NUM_ACTIONS) {
            return Err(AgentError::MalformedBatch(format!("action {a} out of range")));
        }
        let cfg = &self.config;
        let inv_n = 1.0 / n as f64;
        let mut stats = UpdateStats::default();
        let mut grad = match &self.params {
            Params::Mlp(m) => Gradient::Dense(vec![0.0; m.num_params()]),
            Params::Tabular(_) => Gradient::Sparse(HashMap::new()),
        };
        for i in 0..n {
            let obs = &batch.obs[i];
            self.check(obs)?;
            let (out, trace) = match &self.params {
                Params::Mlp(m) => {
                    let (o, t) = m.forward_traced(obs);
                    (o, Some(t))
                }
                Params::Tabular(t) => (t.forward(obs), None),
            };
            let logp = log_softmax(&out.action_logits);
            let p = logp.map(f64::exp);
            let entropy = -p.iter().zip(&logp).map(|(p, l)| p * l).sum::<f64>();
            let (a, adv) = (batch.actions[i], batch.advantages[i]);
            let (rt, re) = (batch.returns_total[i], batch.returns_ext[i]);
            stats.policy_loss -= adv * logp[a] * inv_n;
            stats.entropy += entropy * inv_n;
            stats.value_loss_total += 0.5 * (rt - out.v_total).powi(2) * inv_n;
            stats.value_loss_ext += 0.5 * (re - out.v_ext).powi(2) * inv_n;

            let mut dlogits = [0.0; NUM_ACTIONS];
            for j in 0..NUM_ACTIONS {
                let onehot = if j == a { 1.0 } else { 0.0 };
                let d_policy = -adv * (onehot - p[j]);
                // d(−c·H)/dz_j = c·π_j(log π_j + H)
                let d_entropy = cfg.entropy_coef * p[j] * (logp[j] + entropy);
                dlogits[j] = (d_policy + d_entropy) * inv_n;
            }
            let dv_total = cfg.value_coef * (out.v_total - rt) * inv_n;
            let dv_ext = (out.v_ext - re) * inv_n;
            match (&self.params, &mut grad) {
                (Params::Mlp(m), Gradient::Dense(g)) => {
                    m.backward(trace.as_ref().expect("mlp trace"), &dlogits, dv_total, dv_ext, g);
                }
                (Params::Tabular(_), Gradient::Sparse(g)) => {
                    let e = g.entry(tabular::key(obs)).or_insert([0.0; ENTRY]);
                    for j in 0..NUM_ACTIONS {
                        e[j] += dlogits[j];
                    }
                    e[NUM_ACTIONS] += dv_total;
                    e[NUM_ACTIONS + 1] += dv_ext;
                }
                _ => unreachable!("gradient matches parameter kind"),
            }
        }
        stats.grad_norm = grad.norm();
        let finite = [stats.policy_loss, stats.value_loss_total, stats.value_loss_ext, stats.entropy, stats.grad_norm];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(AgentError::NonFinite {
                what: "loss",
                policy_loss: stats.policy_loss,
                value_loss_total: stats.value_loss_total,
                value_loss_ext: stats.value_loss_ext,
            });
        }
        Ok((stats, grad))
    }

    /// Loss terms and the flat MLP gradient (stop-gradient applied).
    pub fn gradient(&self, batch: &UpdateBatch) -> Result<(UpdateStats, Vec<f64>), AgentError> {
        match self.loss_and_gradient(batch)? {
            (stats, Gradient::Dense(g)) => Ok((stats, g)),
            _ => Err(AgentError::WrongApproximator("TinyMlp")),
        }
    }

    /// One gradient step on prepared targets.
    pub fn apply_update(&mut self, batch: &UpdateBatch) -> Result<UpdateStats, AgentError> {
        let (stats, mut grad) = self.loss_and_gradient(batch)?;
        if let Some(max) = self.config.max_grad_norm {
            if stats.grad_norm > max {
                grad.scale(max / stats.grad_norm);
            }
        }
        let (opt, lr) = (self.config.optimizer, self.config.learning_rate);
        match (&mut self.params, grad, &mut self.optim) {
            (Params::Mlp(m), Gradient::Dense(g), state) => {
                let sq = match state {
                    OptimState::Dense(s) => Some(s.as_mut_slice()),
                    _ => None,
                };
                optimizer_step(&mut m.theta, &g, sq, opt, lr);
                if m.theta.iter().any(|w| !w.is_finite()) {
                    return Err(self.non_finite_weights(stats));
                }
            }
            (Params::Tabular(t), Gradient::Sparse(g), state) => {
                let mut keys: Vec<_> = g.keys().cloned().collect();
                keys.sort();
                for k in keys {
                    let gk = &g[&k];
                    let w = t.entries.entry(k.clone()).or_insert([0.0; ENTRY]);
                    let sq = match state {
                        OptimState::Sparse(s) => Some(s.entry(k).or_insert([0.0; ENTRY]).as_mut_slice()),
                        _ => None,
                    };
                    optimizer_step(w, gk, sq, opt, lr);
                    if w.iter().any(|x| !x.is_finite()) {
                        return Err(self.non_finite_weights(stats));
                    }
                }
            }
            _ => unreachable!("gradient matches parameter kind"),
        }
        Ok(stats)
    }

    fn non_finite_weights(&self, s: UpdateStats) -> AgentError {
        AgentError::NonFinite {
            what: "weights",
            policy_loss: s.policy_loss,
            value_loss_total: s.value_loss_total,
            value_loss_ext: s.value_loss_ext,
        }
    }

    /// A2C step: n-step returns for both critics, then one gradient step.
    pub fn a2c_update(&mut self, rollout: &Rollout) -> Result<UpdateStats, AgentError> {
        let batch = self.prepare(rollout)?;
        self.apply_update(&batch)
    }
}

/// Index of the first action whose cumulative probability exceeds `u`.
pub fn sample_categorical(p: &[f64; NUM_ACTIONS], u: f64) -> usize {
    let mut acc = 0.0;
    for (a, &pa) in p.iter().enumerate() {
        acc += pa;
        if u < acc {
            return a;
        }
    }
    (0..NUM_ACTIONS).rev().find(|&a| p[a] > 0.0).unwrap_or(NUM_ACTIONS - 1)
}
