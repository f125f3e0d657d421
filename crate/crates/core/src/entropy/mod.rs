//! Nonparametric entropy estimation and entropy-based intrinsic rewards.
//!
//! Everything here is a pure function of its inputs. Samples live in a
//! [`SampleBatch`]: a flat block of state coordinates with an optional scalar
//! value attached to every row. Estimators follow the kNN family:
//!
//! * Kozachenko-Leonenko for the entropy of the coordinates,
//! * KSG joint / marginal / conditional estimators over (state, value) pairs,
//!   using the joint maximum norm `max(‖s − s′‖₂, |v − v′|)`,
//! * the state-entropy, value-conditional and reward-conditional bonuses
//!   computed per sample within a batch.
//!
//! A kNN distance of exactly zero (duplicated points) is replaced by
//! [`DISTANCE_FLOOR`] before any logarithm is taken.

mod estimators;
mod knn;
mod rewards;
mod special;

pub use estimators::{
    count_within, kl_entropy, ksg_conditional_entropy, ksg_conditional_forms, ksg_joint_entropy,
    ksg_marginal_entropy, Channel, ConditionalForms,
};
pub use knn::{knn, knn_all};
pub use rewards::{rcse_reward, se_reward, vcse_reward, vcse_terms, VcseTerm};
pub use special::{digamma, log_unit_ball_volume};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest distance allowed inside a logarithm.
pub const DISTANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("{function} is undefined at {arg}")]
    Domain { function: &'static str, arg: f64 },
    #[error("k = {k} needs more than k samples, batch has {n}")]
    TooFewSamples { k: usize, n: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("query index {index} out of range for batch of {n}")]
    QueryOutOfRange { index: usize, n: usize },
    #[error("sample {index} has {got} coordinates, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, got: usize },
    #[error("batch mixes samples with and without values")]
    MixedValues,
    #[error("estimator needs a value channel but the batch has none")]
    MissingValues,
    #[error("{what}: expected {expected} entries, got {got}")]
    LengthMismatch { what: &'static str, expected: usize, got: usize },
    #[error("non-finite input at sample {index}")]
    NonFinite { index: usize },
    #[error("samples must have at least one coordinate")]
    EmptyCoords,
}

/// Norm used for kNN distances.
///
/// `Maximum` on coordinates alone is the Chebyshev norm. When the batch
/// carries values it is the joint norm `max(‖s − s′‖₂, |v − v′|)`, the
/// state block itself measured in the Euclidean norm.
/// `Euclidean` treats an attached value as one more coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormKind {
    Euclidean,
    Maximum,
}

/// A single point: state coordinates plus an optional scalar value.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub coords: Vec<f64>,
    pub value: Option<f64>,
}

impl Sample {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords, value: None }
    }

    pub fn with_value(coords: Vec<f64>, value: f64) -> Self {
        Self { coords, value: Some(value) }
    }
}

/// A validated batch of samples stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    coords: Vec<f64>,
    dim: usize,
    values: Option<Vec<f64>>,
}

impl SampleBatch {
    /// Checks that every sample has the same dimension, that values are
    /// present on all samples or none, and that every number is finite.
    pub fn new(samples: &[Sample]) -> Result<Self, EstimatorError> {
        let dim = samples.first().map_or(1, |s| s.coords.len());
        if dim == 0 {
            return Err(EstimatorError::EmptyCoords);
        }
        let has_values = samples.first().is_some_and(|s| s.value.is_some());
        let mut coords = Vec::with_capacity(samples.len() * dim);
        let mut values = has_values.then(|| Vec::with_capacity(samples.len()));
        for (index, s) in samples.iter().enumerate() {
            if s.coords.len() != dim {
                return Err(EstimatorError::DimensionMismatch { index, expected: dim, got: s.coords.len() });
            }
            match (&mut values, s.value) {
                (Some(vs), Some(v)) => vs.push(v),
                (None, None) => {}
                _ => return Err(EstimatorError::MixedValues),
            }
            coords.extend_from_slice(&s.coords);
        }
        Self::from_flat(coords, dim, values)
    }

    /// Builds a batch from row-major coordinates.
    pub fn from_flat(coords: Vec<f64>, dim: usize, values: Option<Vec<f64>>) -> Result<Self, EstimatorError> {
        if dim == 0 {
            return Err(EstimatorError::EmptyCoords);
        }
        if coords.len() % dim != 0 {
            return Err(EstimatorError::LengthMismatch {
                what: "flat coordinates",
                expected: coords.len().div_ceil(dim) * dim,
                got: coords.len(),
            });
        }
        let n = coords.len() / dim;
        if let Some(vs) = &values {
            if vs.len() != n {
                return Err(EstimatorError::LengthMismatch { what: "values", expected: n, got: vs.len() });
            }
            if let Some(index) = vs.iter().position(|v| !v.is_finite()) {
                return Err(EstimatorError::NonFinite { index });
            }
        }
        if let Some(pos) = coords.iter().position(|c| !c.is_finite()) {
            return Err(EstimatorError::NonFinite { index: pos / dim });
        }
        Ok(Self { coords, dim, values })
    }

    /// One-dimensional samples without values.
    pub fn from_scalars(xs: &[f64]) -> Result<Self, EstimatorError> {
        Self::from_flat(xs.to_vec(), 1, None)
    }

    /// Attaches (or replaces) the value channel.
    pub fn with_values(mut self, values: Vec<f64>) -> Result<Self, EstimatorError> {
        let n = self.len();
        if values.len() != n {
            return Err(EstimatorError::LengthMismatch { what: "values", expected: n, got: values.len() });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(EstimatorError::NonFinite { index });
        }
        self.values = Some(values);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> Option<&[f64]> {
        self.values.as_deref()
    }

    pub fn sample(&self, i: usize) -> Sample {
        Sample { coords: self.row(i).to_vec(), value: self.values.as_ref().map(|v| v[i]) }
    }

    pub(crate) fn view(&self) -> knn::PointSet<'_> {
        knn::PointSet { coords: &self.coords, dim: self.dim, values: self.values.as_deref() }
    }
}

/// The k-th nearest neighbour of a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnResult {
    pub neighbor_index: usize,
    pub distance: f64,
    /// Twice `distance`.
    pub eps: f64,
}

impl KnnResult {
    pub(crate) fn new(neighbor_index: usize, distance: f64) -> Self {
        Self { neighbor_index, distance, eps: 2.0 * distance }
    }
}

/// An entropy estimate in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub nats: f64,
    pub k: usize,
    pub n: usize,
    /// Number of kNN distances that were zero and replaced by [`DISTANCE_FLOOR`].
    pub floored: usize,
}

impl EntropyEstimate {
    pub fn is_degenerate(&self) -> bool {
        self.floored > 0
    }
}

/// `ln(2·d)` with the zero-distance floor applied; the flag reports flooring.
pub(crate) fn log_twice(distance: f64) -> (f64, bool) {
    if distance >= DISTANCE_FLOOR {
        ((2.0 * distance).ln(), false)
    } else {
        ((2.0 * DISTANCE_FLOOR).ln(), true)
    }
}

pub(crate) fn check_k(k: usize, n: usize) -> Result<(), EstimatorError> {
    if k == 0 {
        return Err(EstimatorError::ZeroK);
    }
    if k >= n {
        return Err(EstimatorError::TooFewSamples { k, n });
    }
    Ok(())
}
