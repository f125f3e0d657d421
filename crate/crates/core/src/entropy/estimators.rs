//! Kozachenko-Leonenko and KSG entropy estimators.
//!
//! All estimators take `ε` as twice the kNN distance and pair it with the
//! volume of the ball of unit *diameter*, `c_d / 2^d`, so the estimates are
//! unbiased in the large-sample limit.

use serde::{Deserialize, Serialize};

use super::knn::{Metric, PointSet};
use super::special::digamma_count;
use super::{check_k, log_twice, log_unit_ball_volume, EntropyEstimate, EstimatorError, NormKind, SampleBatch};

/// Which half of a (state, value) sample a marginal quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    State,
    Value,
}

/// ln of the unit-diameter ball volume in `d` dimensions.
fn log_diameter_ball(d: usize, norm: NormKind) -> f64 {
    log_unit_ball_volume(d, norm) - d as f64 * std::f64::consts::LN_2
}

/// Kozachenko-Leonenko estimate of the entropy of the coordinates.
///
/// `H = −ψ(k) + ψ(N) + ln c_d + (d/N) Σ ln D(i)`, D(i) twice the kNN
/// distance. Any value channel on the batch is ignored.
pub fn kl_entropy(batch: &SampleBatch, k: usize, norm: NormKind) -> Result<EntropyEstimate, EstimatorError> {
    let n = batch.len();
    check_k(k, n)?;
    let view = PointSet { coords: batch.coords(), dim: batch.dim(), values: None };
    let metric = match norm {
        NormKind::Euclidean => Metric::StateEuclidean,
        NormKind::Maximum => Metric::Chebyshev,
    };
    let mut floored = 0;
    let mut sum_log = 0.0;
    for r in view.kth_neighbors(k, metric) {
        let (l, f) = log_twice(r.distance);
        sum_log += l;
        floored += f as usize;
    }
    let d = batch.dim() as f64;
    let nats = -digamma_count(k) + digamma_count(n) + log_diameter_ball(batch.dim(), norm) + d * sum_log / n as f64;
    Ok(EntropyEstimate { nats, k, n, floored })
}

/// Number of *other* samples whose value lies strictly inside
/// `(v_c − eps_v/2, v_c + eps_v/2)`.
pub fn count_within(values: &[f64], center_index: usize, eps_v: f64) -> usize {
    let center = values[center_index];
    let radius = eps_v / 2.0;
    values
        .iter()
        .enumerate()
        .filter(|&(j, &v)| j != center_index && (v - center).abs() < radius)
        .count()
}

/// Per-sample quantities of the KSG construction.
struct KsgTerms {
    /// ln ε(i), joint max-norm.
    sum_log_eps: f64,
    sum_log_eps_state: f64,
    sum_log_eps_value: f64,
    /// Σ ψ(n_s(i) + 1), counted in state space inside ε_s(i)/2.
    sum_psi_state: f64,
    /// Σ ψ(n_v(i) + 1), counted in value space inside ε_v(i)/2.
    sum_psi_value: f64,
    floored_joint: usize,
    floored_state: usize,
    floored_value: usize,
}

fn ksg_terms(view: &PointSet<'_>, k: usize, state_counts: bool) -> KsgTerms {
    let values = view.values.expect("caller checked values");
    let n = view.len();
    let neighbors = view.kth_neighbors(k, Metric::JointMax);
    let mut t = KsgTerms {
        sum_log_eps: 0.0,
        sum_log_eps_state: 0.0,
        sum_log_eps_value: 0.0,
        sum_psi_state: 0.0,
        sum_psi_value: 0.0,
        floored_joint: 0,
        floored_state: 0,
        floored_value: 0,
    };
    for (i, r) in neighbors.iter().enumerate() {
        let ds = view.state_distance(i, r.neighbor_index);
        let dv = view.value_distance(i, r.neighbor_index);
        let (l, f) = log_twice(r.distance);
        t.sum_log_eps += l;
        t.floored_joint += f as usize;
        let (l, f) = log_twice(ds);
        t.sum_log_eps_state += l;
        t.floored_state += f as usize;
        let (l, f) = log_twice(dv);
        t.sum_log_eps_value += l;
        t.floored_value += f as usize;

        if state_counts {
            let n_s = (0..n).filter(|&j| j != i && view.state_distance(i, j) < ds).count();
            t.sum_psi_state += digamma_count(n_s + 1);
        }
        let n_v = count_within(values, i, 2.0 * dv);
        t.sum_psi_value += digamma_count(n_v + 1);
    }
    t
}

fn joint_view(batch: &SampleBatch, k: usize) -> Result<PointSet<'_>, EstimatorError> {
    check_k(k, batch.len())?;
    if batch.values().is_none() {
        return Err(EstimatorError::MissingValues);
    }
    Ok(batch.view())
}

fn joint_from_terms(t: &KsgTerms, k: usize, n: usize, d_s: usize) -> f64 {
    -digamma_count(k)
        + digamma_count(n)
        + log_diameter_ball(d_s, NormKind::Euclidean)
        + log_diameter_ball(1, NormKind::Euclidean)
        + (d_s + 1) as f64 * t.sum_log_eps / n as f64
}

fn value_marginal_from_terms(t: &KsgTerms, n: usize) -> f64 {
    -t.sum_psi_value / n as f64
        + digamma_count(n)
        + log_diameter_ball(1, NormKind::Euclidean)
        + t.sum_log_eps_value / n as f64
}

/// KSG estimate of the joint entropy H(S, V) under `max(‖s − s′‖₂, |v − v′|)`.
pub fn ksg_joint_entropy(batch: &SampleBatch, k: usize) -> Result<EntropyEstimate, EstimatorError> {
    let view = joint_view(batch, k)?;
    let t = ksg_terms(&view, k, false);
    let n = batch.len();
    Ok(EntropyEstimate { nats: joint_from_terms(&t, k, n, batch.dim()), k, n, floored: t.floored_joint })
}

/// KSG estimate of a marginal entropy.
///
/// The joint kNN fixes the per-sample scale ε_c(i) (twice the distance to
/// the neighbour's projection on `channel`); n_c(i) counts the other samples
/// strictly inside ε_c(i)/2 on that channel.
pub fn ksg_marginal_entropy(
    batch: &SampleBatch,
    k: usize,
    channel: Channel,
) -> Result<EntropyEstimate, EstimatorError> {
    let view = joint_view(batch, k)?;
    let t = ksg_terms(&view, k, channel == Channel::State);
    let n = batch.len();
    let (nats, floored) = match channel {
        Channel::Value => (value_marginal_from_terms(&t, n), t.floored_value),
        Channel::State => {
            let d = batch.dim();
            let nats = -t.sum_psi_state / n as f64
                + digamma_count(n)
                + log_diameter_ball(d, NormKind::Euclidean)
                + d as f64 * t.sum_log_eps_state / n as f64;
            (nats, t.floored_state)
        }
    };
    Ok(EntropyEstimate { nats, k, n, floored })
}

/// Both algebraic routes to H(S | V), for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalForms {
    /// H(S, V) − H(V) from the joint and value-marginal estimators.
    pub chain_rule: f64,
    /// `−ψ(k) + ⟨ψ(n_v + 1)⟩ + ln c_{d_S} + d_S ⟨ln ε⟩`, the closed form whose
    /// per-sample terms define the value-conditional bonus.
    pub closed_form: f64,
    /// `closed_form − chain_rule`; equals `−⟨ln ε − ln ε_v⟩` up to rounding.
    pub gap: f64,
}

/// KSG estimate of the value-conditional state entropy H(S | V), computed as
/// the joint estimate minus the value-marginal estimate.
pub fn ksg_conditional_entropy(batch: &SampleBatch, k: usize) -> Result<EntropyEstimate, EstimatorError> {
    let view = joint_view(batch, k)?;
    let t = ksg_terms(&view, k, false);
    let n = batch.len();
    let nats = joint_from_terms(&t, k, n, batch.dim()) - value_marginal_from_terms(&t, n);
    Ok(EntropyEstimate { nats, k, n, floored: t.floored_joint + t.floored_value })
}

/// Diagnostic: the chain-rule and closed-form conditional estimates side by side.
pub fn ksg_conditional_forms(batch: &SampleBatch, k: usize) -> Result<ConditionalForms, EstimatorError> {
    let view = joint_view(batch, k)?;
    let t = ksg_terms(&view, k, false);
    let n = batch.len();
    let d_s = batch.dim();
    let chain_rule = joint_from_terms(&t, k, n, d_s) - value_marginal_from_terms(&t, n);
    let closed_form = -digamma_count(k)
        + t.sum_psi_value / n as f64
        + log_diameter_ball(d_s, NormKind::Euclidean)
        + d_s as f64 * t.sum_log_eps / n as f64;
    Ok(ConditionalForms { chain_rule, closed_form, gap: closed_form - chain_rule })
}
