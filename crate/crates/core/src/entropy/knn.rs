//! Exhaustive k-nearest-neighbour search.
//!
//! Exhaustive search is the reference: every query computes all N − 1
//! distances and selects the k-th under the total order (distance, index),
//! so ties always resolve toward the lower sample index.

use rayon::prelude::*;

use super::{check_k, EstimatorError, KnnResult, NormKind, SampleBatch};

/// Batches at least this large fan queries out over the rayon pool.
const PARALLEL_THRESHOLD: usize = 1024;

/// Borrowed row-major coordinates with an optional value channel.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PointSet<'a> {
    pub coords: &'a [f64],
    pub dim: usize,
    pub values: Option<&'a [f64]>,
}

/// Concrete distance functions behind [`NormKind`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Metric {
    /// L2 over coordinates, plus the value as an extra coordinate if present.
    Euclidean,
    /// L2 over coordinates only.
    StateEuclidean,
    /// L∞ over coordinates.
    Chebyshev,
    /// max(‖s − s′‖₂, |v − v′|).
    JointMax,
}

impl Metric {
    pub(crate) fn for_norm(norm: NormKind, has_values: bool) -> Self {
        match (norm, has_values) {
            (NormKind::Euclidean, _) => Metric::Euclidean,
            (NormKind::Maximum, false) => Metric::Chebyshev,
            (NormKind::Maximum, true) => Metric::JointMax,
        }
    }
}

impl<'a> PointSet<'a> {
    pub(crate) fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    #[inline]
    pub(crate) fn row(&self, i: usize) -> &'a [f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub(crate) fn state_distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.row(i), self.row(j));
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }

    #[inline]
    pub(crate) fn value_distance(&self, i: usize, j: usize) -> f64 {
        match self.values {
            Some(v) => (v[i] - v[j]).abs(),
            None => 0.0,
        }
    }

    #[inline]
    pub(crate) fn distance(&self, i: usize, j: usize, metric: Metric) -> f64 {
        match metric {
            Metric::StateEuclidean => self.state_distance(i, j),
            Metric::Euclidean => {
                let (a, b) = (self.row(i), self.row(j));
                let mut sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                if let Some(v) = self.values {
                    let dv = v[i] - v[j];
                    sq += dv * dv;
                }
                sq.sqrt()
            }
            Metric::Chebyshev => {
                let (a, b) = (self.row(i), self.row(j));
                a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
            }
            Metric::JointMax => self.state_distance(i, j).max(self.value_distance(i, j)),
        }
    }

    /// k-th nearest neighbour of `query` (self excluded), 1-based k.
    pub(crate) fn kth_neighbor(&self, query: usize, k: usize, metric: Metric) -> KnnResult {
        let n = self.len();
        let mut scratch: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
        self.kth_neighbor_with(query, k, metric, &mut scratch)
    }

    fn kth_neighbor_with(
        &self,
        query: usize,
        k: usize,
        metric: Metric,
        scratch: &mut Vec<(f64, usize)>,
    ) -> KnnResult {
        scratch.clear();
        scratch.extend((0..self.len()).filter(|&j| j != query).map(|j| (self.distance(query, j, metric), j)));
        let (_, &mut (distance, neighbor), _) =
            scratch.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        KnnResult::new(neighbor, distance)
    }

    /// k-th nearest neighbour of every point.
    pub(crate) fn kth_neighbors(&self, k: usize, metric: Metric) -> Vec<KnnResult> {
        let n = self.len();
        if n >= PARALLEL_THRESHOLD {
            (0..n)
                .into_par_iter()
                .map_init(|| Vec::with_capacity(n), |scratch, i| self.kth_neighbor_with(i, k, metric, scratch))
                .collect()
        } else {
            let mut scratch = Vec::with_capacity(n);
            (0..n).map(|i| self.kth_neighbor_with(i, k, metric, &mut scratch)).collect()
        }
    }
}

/// k-th nearest neighbour of `batch[query]` under `norm`, excluding the query.
pub fn knn(batch: &SampleBatch, query: usize, k: usize, norm: NormKind) -> Result<KnnResult, EstimatorError> {
    let n = batch.len();
    if query >= n {
        return Err(EstimatorError::QueryOutOfRange { index: query, n });
    }
    check_k(k, n)?;
    let view = batch.view();
    Ok(view.kth_neighbor(query, k, Metric::for_norm(norm, view.values.is_some())))
}

/// [`knn`] for every sample of the batch.
pub fn knn_all(batch: &SampleBatch, k: usize, norm: NormKind) -> Result<Vec<KnnResult>, EstimatorError> {
    check_k(k, batch.len())?;
    let view = batch.view();
    Ok(view.kth_neighbors(k, Metric::for_norm(norm, view.values.is_some())))
}
