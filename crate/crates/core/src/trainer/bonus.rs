//! Intrinsic bonuses on on-policy minibatches.

use serde::{Deserialize, Serialize};

use crate::entropy::{se_reward, vcse_reward, SampleBatch};
use crate::gridworld::ObsMode;

use super::TrainError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BonusMode {
    None,
    SE,
    VCSE,
    RCSE,
}

/// Where the values that condition the VCSE bonus come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValueSource {
    /// The extrinsic critic's estimates.
    Critic,
    /// Exact V^π of the current policy on the tabular model (fixed maps only).
    PolicyEvaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplorationConfig {
    pub mode: BonusMode,
    pub k: usize,
    /// Constant over training.
    pub beta: f64,
    /// Split each rollout into bonus batches of this many transitions;
    /// `None` uses the whole rollout.
    pub bonus_batch_size: Option<usize>,
    /// Divide SE bonuses by their population std within the batch.
    pub normalize_se_by_std: bool,
    /// Representation the kNN distances are measured in.
    pub bonus_encoding: ObsMode,
    pub value_source: ValueSource,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        Self {
            mode: BonusMode::None,
            k: 5,
            beta: 0.005,
            bonus_batch_size: None,
            normalize_se_by_std: true,
            bonus_encoding: ObsMode::AgentXY,
            value_source: ValueSource::Critic,
        }
    }
}

impl ExplorationConfig {
    /// Checks the config against the number of transitions per rollout.
    pub fn validate(&self, rollout_len: usize) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return bad(format!("beta must be a non-negative number, got {}", self.beta));
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        let batch = self.bonus_batch_size.unwrap_or(rollout_len);
        if batch == 0 || batch > rollout_len {
            return bad(format!("bonus_batch_size {batch} must lie in 1..={rollout_len} (transitions per rollout)"));
        }
        if self.mode != BonusMode::None && self.k >= batch {
            return bad(format!("k = {} must be smaller than the bonus batch size {batch}", self.k));
        }
        Ok(())
    }
}

/// `(v − mean) / std` with the population std; all zeros when std < 1e-8.
pub fn normalize_values(raw: &[f64]) -> Vec<f64> {
    let n = raw.len() as f64;
    if raw.is_empty() {
        return Vec::new();
    }
    let mean = raw.iter().sum::<f64>() / n;
    let std = (raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if std < 1e-8 {
        return vec![0.0; raw.len()];
    }
    raw.iter().map(|v| (v - mean) / std).collect()
}

/// One bonus batch. Fill the inputs, then call [`compose_bonus`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Minibatch {
    /// Bonus encodings of the visited states.
    pub states: Vec<Vec<f64>>,
    pub extrinsic_rewards: Vec<f64>,
    /// Required for VCSE.
    pub raw_values: Option<Vec<f64>>,
    pub normalized_values: Vec<f64>,
    pub intrinsic_rewards: Vec<f64>,
    pub total_rewards: Vec<f64>,
}

/// Computes intrinsic rewards and `total = extrinsic + beta * intrinsic`.
pub fn compose_bonus(batch: &mut Minibatch, cfg: &ExplorationConfig) -> Result<(), TrainError> {
    let n = batch.states.len();
    if batch.extrinsic_rewards.len() != n {
        return Err(TrainError::Config(format!("{} rewards for {n} states", batch.extrinsic_rewards.len())));
    }
    let states = || -> Result<SampleBatch, TrainError> {
        let dim = batch.states.first().map_or(0, Vec::len);
        let flat: Vec<f64> = batch.states.iter().flatten().copied().collect();
        Ok(SampleBatch::from_flat(flat, dim, None)?)
    };
    batch.normalized_values.clear();
    batch.intrinsic_rewards = match cfg.mode {
        BonusMode::None => vec![0.0; n],
        BonusMode::SE => {
            let mut r = se_reward(&states()?, cfg.k)?;
            if cfg.normalize_se_by_std {
                let mean = r.iter().sum::<f64>() / n as f64;
                let std = (r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
                if std >= 1e-8 {
                    r.iter_mut().for_each(|v| *v /= std);
                }
            }
            r
        }
        BonusMode::VCSE => {
            let raw = batch.raw_values.as_ref().ok_or(TrainError::MissingValues)?;
            if raw.len() != n {
                return Err(TrainError::Config(format!("{} values for {n} states", raw.len())));
            }
            batch.normalized_values = normalize_values(raw);
            vcse_reward(&states()?, &batch.normalized_values, cfg.k)?
        }
        BonusMode::RCSE => {
            batch.normalized_values = normalize_values(&batch.extrinsic_rewards);
            vcse_reward(&states()?, &batch.normalized_values, cfg.k)?
        }
    };
    batch.total_rewards =
        batch.extrinsic_rewards.iter().zip(&batch.intrinsic_rewards).map(|(e, i)| e + cfg.beta * i).collect();
    Ok(())
}

/// Average ranks, ties sharing the mean of their positions.
fn ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0;
        for &o in &order[i..=j] {
            out[o] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; 0 when either side is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

/// VCSE bonuses of one buffer computed in consecutive chunks of `size`.
pub fn chunked_vcse(states: &[Vec<f64>], raw_values: &[f64], k: usize, size: usize) -> Result<Vec<f64>, TrainError> {
    let cfg = ExplorationConfig { mode: BonusMode::VCSE, k, ..Default::default() };
    let mut out = Vec::with_capacity(states.len());
    for (s, v) in states.chunks(size).zip(raw_values.chunks(size)) {
        let mut mb = Minibatch {
            states: s.to_vec(),
            extrinsic_rewards: vec![0.0; s.len()],
            raw_values: Some(v.to_vec()),
            ..Default::default()
        };
        compose_bonus(&mut mb, &cfg)?;
        out.extend(mb.intrinsic_rewards);
    }
    Ok(out)
}

/// Rank agreement of VCSE bonuses on the same buffer under two bonus batch
/// sizes.
pub fn batch_size_rank_correlation(
    states: &[Vec<f64>],
    raw_values: &[f64],
    k: usize,
    sizes: (usize, usize),
) -> Result<f64, TrainError> {
    let a = chunked_vcse(states, raw_values, k, sizes.0)?;
    let b = chunked_vcse(states, raw_values, k, sizes.1)?;
    Ok(spearman(&a, &b))
}
