//! Exact policy evaluation on the tabular model.

use crate::gridworld::{Action, ModelStep, ObsMode, TransitionModel};

use super::{Agent, AgentError, NUM_ACTIONS};

const MAX_SWEEPS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyValues {
    /// Indexed like the model's states.
    pub values: Vec<f64>,
    /// ‖T_π V − V‖_∞ of the returned values.
    pub residual: f64,
    pub sweeps: usize,
}

fn backup(model: &TransitionModel, policy: &[[f64; NUM_ACTIONS]], gamma: f64, values: &[f64], s: usize) -> f64 {
    Action::ALL
        .iter()
        .map(|&a| {
            let p = policy[s][a.index()];
            if p == 0.0 {
                return 0.0;
            }
            p * match model.step(s, a) {
                ModelStep::Next { state, reward } => reward + gamma * values[state],
                ModelStep::Terminal { reward, .. } => reward,
            }
        })
        .sum()
}

/// ‖T_π V − V‖_∞.
pub fn bellman_residual(model: &TransitionModel, policy: &[[f64; NUM_ACTIONS]], gamma: f64, values: &[f64]) -> f64 {
    (0..model.num_states())
        .map(|s| (backup(model, policy, gamma, values, s) - values[s]).abs())
        .fold(0.0, f64::max)
}

/// V^π by Gauss-Seidel sweeps. For `gamma < 1` the sweeps continue until
/// the residual is below `tol·(1 − gamma)`, which puts V within `tol` of the
/// fixed point and a fortiori gives a residual below `tol`.
pub fn policy_evaluation(
    model: &TransitionModel,
    policy: &[[f64; NUM_ACTIONS]],
    gamma: f64,
    tol: f64,
) -> Result<PolicyValues, AgentError> {
    let n = model.num_states();
    if policy.len() != n {
        return Err(AgentError::PolicySize { expected: n, got: policy.len() });
    }
    let target = if gamma < 1.0 { tol * (1.0 - gamma) } else { tol };
    let mut values = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for sweep in 1..=MAX_SWEEPS {
        for s in 0..n {
            values[s] = backup(model, policy, gamma, &values, s);
        }
        residual = bellman_residual(model, policy, gamma, &values);
        if residual <= target {
            return Ok(PolicyValues { values, residual, sweeps: sweep });
        }
        if !residual.is_finite() {
            break;
        }
    }
    Err(AgentError::NotConverged { iterations: MAX_SWEEPS, residual })
}

/// The agent's action distribution in every model state.
pub fn policy_table(agent: &Agent, model: &TransitionModel, mode: ObsMode) -> Result<Vec<[f64; NUM_ACTIONS]>, AgentError> {
    (0..model.num_states()).map(|s| Ok(agent.forward(&model.observe(s, mode).data)?.probabilities())).collect()
}
