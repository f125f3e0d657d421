//! Per-sample intrinsic rewards computed within a batch.

use super::knn::{Metric, PointSet};
use super::special::digamma_count;
use super::{check_k, count_within, log_twice, EstimatorError, SampleBatch};

/// State-entropy bonus `ln(D_s(i) + 1)`, D_s(i) twice the Euclidean kNN
/// distance between state coordinates. Values on the batch are ignored.
pub fn se_reward(states: &SampleBatch, k: usize) -> Result<Vec<f64>, EstimatorError> {
    check_k(k, states.len())?;
    let view = PointSet { coords: states.coords(), dim: states.dim(), values: None };
    Ok(view
        .kth_neighbors(k, Metric::StateEuclidean)
        .into_iter()
        .map(|r| (r.eps + 1.0).ln())
        .collect())
}

/// Everything computed for one sample of the value-conditional bonus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VcseTerm {
    /// Joint kNN under `max(‖s − s′‖₂, |v − v′|)`.
    pub neighbor_index: usize,
    pub eps_state: f64,
    pub eps_value: f64,
    /// `max(eps_state, eps_value)`.
    pub eps: f64,
    pub n_v: usize,
    pub reward: f64,
    /// ε was zero and the distance floor was used.
    pub floored: bool,
}

/// Per-sample value-conditional terms: find the joint kNN, split its
/// distance into state and value parts, count values inside the value
/// window and form `ψ(n_v + 1)/d_S + ln ε`.
pub fn vcse_terms(states: &SampleBatch, values: &[f64], k: usize) -> Result<Vec<VcseTerm>, EstimatorError> {
    let n = states.len();
    if values.len() != n {
        return Err(EstimatorError::LengthMismatch { what: "values", expected: n, got: values.len() });
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(EstimatorError::NonFinite { index });
    }
    check_k(k, n)?;
    let view = PointSet { coords: states.coords(), dim: states.dim(), values: Some(values) };
    let d_s = states.dim() as f64;
    Ok(view
        .kth_neighbors(k, Metric::JointMax)
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let j = r.neighbor_index;
            let eps_state = 2.0 * view.state_distance(i, j);
            let eps_value = 2.0 * view.value_distance(i, j);
            let eps = eps_state.max(eps_value);
            let n_v = count_within(values, i, eps_value);
            let (log_eps, floored) = log_twice(eps / 2.0);
            let reward = digamma_count(n_v + 1) / d_s + log_eps;
            VcseTerm { neighbor_index: j, eps_state, eps_value, eps, n_v, reward, floored }
        })
        .collect())
}

/// Value-conditional state-entropy bonus. `values` should already be
/// normalized within the batch.
pub fn vcse_reward(states: &SampleBatch, values: &[f64], k: usize) -> Result<Vec<f64>, EstimatorError> {
    Ok(vcse_terms(states, values, k)?.into_iter().map(|t| t.reward).collect())
}

/// Reward-conditional variant: the same bonus conditioned on (normalized)
/// one-step extrinsic rewards instead of values.
pub fn rcse_reward(states: &SampleBatch, one_step_rewards: &[f64], k: usize) -> Result<Vec<f64>, EstimatorError> {
    vcse_reward(states, one_step_rewards, k)
}
