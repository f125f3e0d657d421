//! Estimator checks against brute-force oracles and analytic entropies.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use vcse_core::entropy::*;

const GAUSS_1D: f64 = 1.418_938_533_204_672_7; // 0.5 ln(2πe)

// ---------------------------------------------------------------------------
// Oracles: full sort of all distances, written independently of the crate.

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn oracle_distance(batch: &SampleBatch, i: usize, j: usize, norm: NormKind) -> f64 {
    let (a, b) = (batch.row(i), batch.row(j));
    match (norm, batch.values()) {
        (NormKind::Euclidean, None) => euclid(a, b),
        (NormKind::Euclidean, Some(v)) => {
            let mut pa = a.to_vec();
            pa.push(v[i]);
            let mut pb = b.to_vec();
            pb.push(v[j]);
            euclid(&pa, &pb)
        }
        (NormKind::Maximum, None) => a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max),
        (NormKind::Maximum, Some(v)) => euclid(a, b).max((v[i] - v[j]).abs()),
    }
}

fn oracle_knn(batch: &SampleBatch, q: usize, k: usize, norm: NormKind) -> (usize, f64) {
    let mut all: Vec<(f64, usize)> =
        (0..batch.len()).filter(|&j| j != q).map(|j| (oracle_distance(batch, q, j, norm), j)).collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    (all[k - 1].1, all[k - 1].0)
}

fn oracle_se(states: &SampleBatch, k: usize) -> Vec<f64> {
    let plain = SampleBatch::from_flat(states.coords().to_vec(), states.dim(), None).unwrap();
    (0..plain.len()).map(|i| (2.0 * oracle_knn(&plain, i, k, NormKind::Euclidean).1 + 1.0).ln()).collect()
}

fn oracle_vcse(states: &SampleBatch, values: &[f64], k: usize) -> Vec<f64> {
    let joint = SampleBatch::from_flat(states.coords().to_vec(), states.dim(), Some(values.to_vec())).unwrap();
    let d = states.dim() as f64;
    (0..joint.len())
        .map(|i| {
            let (j, _) = oracle_knn(&joint, i, k, NormKind::Maximum);
            let eps_s = 2.0 * euclid(joint.row(i), joint.row(j));
            let eps_v = 2.0 * (values[i] - values[j]).abs();
            let eps = eps_s.max(eps_v);
            let mut n_v = 0usize;
            for (m, v) in values.iter().enumerate() {
                if m != i && (v - values[i]).abs() < eps_v / 2.0 {
                    n_v += 1;
                }
            }
            // ψ(n+1) = H_n − γ
            let psi = (1..=n_v).map(|m| 1.0 / m as f64).sum::<f64>() - 0.577_215_664_901_532_9;
            psi / d + eps.max(2e-12).ln()
        })
        .collect()
}

// ---------------------------------------------------------------------------

fn assert_all_close(got: &[f64], want: &[f64], tol: f64) {
    assert_eq!(got.len(), want.len());
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        assert!((g - w).abs() <= tol, "sample {i}: {g} vs {w}");
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform_batch(n: usize, dim: usize, seed: u64) -> SampleBatch {
    let mut r = rng(seed);
    SampleBatch::from_flat((0..n * dim).map(|_| r.random::<f64>()).collect(), dim, None).unwrap()
}

fn normal(r: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(r)
}

fn gaussian_pairs(n: usize, rho: f64, seed: u64) -> SampleBatch {
    let mut r = rng(seed);
    let mut coords = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        let v = normal(&mut r);
        let s = rho * v + (1.0 - rho * rho).sqrt() * normal(&mut r);
        coords.push(s);
        values.push(v);
    }
    SampleBatch::from_flat(coords, 1, Some(values)).unwrap()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

#[test]
fn knn_matches_oracle_on_random_plane() {
    let batch = uniform_batch(200, 2, 7);
    for norm in [NormKind::Euclidean, NormKind::Maximum] {
        for q in 0..200 {
            let got = knn(&batch, q, 12, norm).unwrap();
            let (j, d) = oracle_knn(&batch, q, 12, norm);
            assert_eq!((got.neighbor_index, got.distance), (j, d));
            assert_eq!(got.eps, 2.0 * d);
        }
    }
}

#[test]
fn se_matches_oracle() {
    let states = uniform_batch(500, 3, 11);
    assert_eq!(se_reward(&states, 12).unwrap(), oracle_se(&states, 12));
}

#[test]
fn vcse_and_rcse_match_oracle() {
    let mut r = rng(5);
    let states = uniform_batch(300, 2, 5);
    let values: Vec<f64> = (0..300).map(|_| normal(&mut r)).collect();
    assert_all_close(&vcse_reward(&states, &values, 12).unwrap(), &oracle_vcse(&states, &values, 12), 1e-12);
    let rewards: Vec<f64> = (0..300).map(|_| if r.random::<f64>() < 0.1 { 1.0 } else { 0.0 }).collect();
    assert_all_close(&rcse_reward(&states, &rewards, 12).unwrap(), &oracle_vcse(&states, &rewards, 12), 1e-12);
}

#[test]
fn kl_uniform_and_gaussian() {
    for seed in 0..10 {
        let u = uniform_batch(10_000, 1, seed);
        let h = kl_entropy(&u, 5, NormKind::Euclidean).unwrap().nats;
        assert!(h.abs() < 0.05, "uniform seed {seed}: {h}");

        let mut r = rng(1000 + seed);
        let g = SampleBatch::from_scalars(&(0..10_000).map(|_| normal(&mut r)).collect::<Vec<_>>()).unwrap();
        let h = kl_entropy(&g, 5, NormKind::Euclidean).unwrap().nats;
        assert!((h - GAUSS_1D).abs() < 0.05, "gaussian seed {seed}: {h}");
    }
}

#[test]
fn kl_max_norm_on_unit_square() {
    let u = uniform_batch(10_000, 2, 3);
    let h = kl_entropy(&u, 5, NormKind::Maximum).unwrap().nats;
    assert!(h.abs() < 0.05, "{h}");
}

#[test]
fn ksg_joint_targets() {
    let mut r = rng(21);
    let coords: Vec<f64> = (0..10_000).map(|_| r.random()).collect();
    let values: Vec<f64> = (0..10_000).map(|_| r.random()).collect();
    let u = SampleBatch::from_flat(coords, 1, Some(values)).unwrap();
    let h = ksg_joint_entropy(&u, 5).unwrap().nats;
    assert!(h.abs() < 0.08, "uniform joint {h}");

    let g = gaussian_pairs(10_000, 0.0, 22);
    let h = ksg_joint_entropy(&g, 5).unwrap().nats;
    assert!((h - 2.0 * GAUSS_1D).abs() < 0.08, "gaussian joint {h}");
}

#[test]
fn ksg_marginal_targets() {
    let mut r = rng(31);
    let coords: Vec<f64> = (0..10_000).map(|_| r.random()).collect();
    let values: Vec<f64> = (0..10_000).map(|_| normal(&mut r)).collect();
    let b = SampleBatch::from_flat(coords, 1, Some(values)).unwrap();
    let hs = ksg_marginal_entropy(&b, 5, Channel::State).unwrap().nats;
    assert!(hs.abs() < 0.05, "uniform state marginal {hs}");
    let hv = ksg_marginal_entropy(&b, 5, Channel::Value).unwrap().nats;
    assert!((hv - GAUSS_1D).abs() < 0.05, "gaussian value marginal {hv}");
}

#[test]
fn ksg_conditional_targets() {
    let analytic = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * (1.0 - 0.81)).ln();
    let g = gaussian_pairs(10_000, 0.9, 41);
    let h = ksg_conditional_entropy(&g, 5).unwrap().nats;
    assert!((h - analytic).abs() < 0.08, "rho=0.9: {h} vs {analytic}");

    let mut r = rng(42);
    let coords: Vec<f64> = (0..10_000).map(|_| r.random()).collect();
    let values: Vec<f64> = (0..10_000).map(|_| r.random()).collect();
    let u = SampleBatch::from_flat(coords, 1, Some(values)).unwrap();
    let h = ksg_conditional_entropy(&u, 5).unwrap().nats;
    assert!(h.abs() < 0.08, "independent uniform: {h}");

    // state = monotone function of value plus σ = 1e-3 noise: analytic about −5.5
    let mut r = rng(43);
    let values: Vec<f64> = (0..10_000).map(|_| r.random::<f64>()).collect();
    let coords: Vec<f64> = values.iter().map(|v| v * v * v + 2.0 * v + 1e-3 * normal(&mut r)).collect();
    let b = SampleBatch::from_flat(coords, 1, Some(values)).unwrap();
    let h = ksg_conditional_entropy(&b, 5).unwrap().nats;
    assert!(h < -4.0, "near-deterministic: {h}");
}

#[test]
fn ksg_joint_on_singular_density_is_finite_and_low() {
    let mut r = rng(51);
    let xs: Vec<f64> = (0..5_000).map(|_| normal(&mut r)).collect();
    let b = SampleBatch::from_flat(xs.clone(), 1, Some(xs)).unwrap();
    let h = ksg_joint_entropy(&b, 5).unwrap();
    assert!(h.nats.is_finite());
    // A proper 2-D density with these marginals would have H ≥ ... the joint of
    // a line collapses far below a single marginal.
    assert!(h.nats < GAUSS_1D - 1.0, "{}", h.nats);
}

#[test]
fn appendix_d_configuration_counts_five() {
    // Center z = (s 0, v 0), k = 2. The second joint neighbour sits at v-gap 1,
    // so the value window is (−1, 1); five other points fall strictly inside.
    let pts = [
        (0.0, 0.0), // center
        (0.5, 0.1), // 1st joint neighbour
        (0.6, 1.0), // 2nd joint neighbour, on the window edge
        (5.0, 0.2),
        (-5.0, -0.5),
        (6.0, 0.7),
        (-4.5, -0.9),
        (0.2, 3.0),
        (7.0, 2.0),
        (-8.0, -1.5),
    ];
    let states = SampleBatch::from_flat(pts.iter().map(|p| p.0).collect(), 1, None).unwrap();
    let values: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let terms = vcse_terms(&states, &values, 2).unwrap();
    assert_eq!(terms[0].neighbor_index, 2);
    assert_eq!(terms[0].eps_value, 2.0);
    assert_eq!(terms[0].n_v, 5);
    assert_eq!(count_within(&values, 0, terms[0].eps_value), 5);
}

#[test]
fn two_value_clusters_partition_neighbours() {
    let mut r = rng(61);
    let n = 120;
    let coords: Vec<f64> = (0..n * 2).map(|_| r.random::<f64>()).collect();
    let values: Vec<f64> = (0..n).map(|i| if i < n / 2 { 0.0 } else { 100.0 } + 0.01 * r.random::<f64>()).collect();
    let states = SampleBatch::from_flat(coords, 2, None).unwrap();
    for (i, t) in vcse_terms(&states, &values, 5).unwrap().iter().enumerate() {
        assert_eq!(i < n / 2, t.neighbor_index < n / 2, "sample {i}");
    }
}

#[test]
fn constant_values_rank_like_se() {
    let states = uniform_batch(256, 2, 71);
    let se = se_reward(&states, 5).unwrap();
    let vc = vcse_reward(&states, &vec![0.0; 256], 5).unwrap();
    let argsort = |xs: &[f64]| {
        let mut idx: Vec<usize> = (0..xs.len()).collect();
        idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap().then(a.cmp(&b)));
        idx
    };
    assert_eq!(argsort(&se), argsort(&vc));
}

#[test]
fn kl_error_shrinks_as_n_doubles() {
    let seeds = 0..40u64;
    let mut medians = Vec::new();
    for n in [1_000usize, 2_000, 4_000, 8_000] {
        let errs = seeds
            .clone()
            .map(|s| {
                let mut r = rng(5_000 + s);
                let g = SampleBatch::from_scalars(&(0..n).map(|_| normal(&mut r)).collect::<Vec<_>>()).unwrap();
                (kl_entropy(&g, 5, NormKind::Euclidean).unwrap().nats - GAUSS_1D).abs()
            })
            .collect();
        medians.push(median(errs));
    }
    assert!(medians.windows(2).all(|w| w[1] < w[0]), "{medians:?}");
}

// ---------------------------------------------------------------------------
// Properties

fn batch_strategy(max_n: usize, dim: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    // Coordinates on a coarse lattice half of the time so that ties occur.
    (18..=max_n).prop_flat_map(move |n| {
        let coord = prop_oneof![(0i32..6).prop_map(|c| c as f64), -10.0f64..10.0];
        (prop::collection::vec(coord, n * dim), prop::collection::vec(-3.0f64..3.0, n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn knn_equals_exhaustive_sort((coords, values) in batch_strategy(512, 2), k in 1usize..=16, with_values: bool) {
        let n = values.len();
        let batch = SampleBatch::from_flat(coords, 2, with_values.then_some(values)).unwrap();
        for norm in [NormKind::Euclidean, NormKind::Maximum] {
            for q in (0..n).step_by(7) {
                let got = knn(&batch, q, k, norm).unwrap();
                let (j, d) = oracle_knn(&batch, q, k, norm);
                prop_assert_eq!((got.neighbor_index, got.distance), (j, d));
            }
        }
    }

    #[test]
    fn translation_leaves_estimates_unchanged(
        (coords, values) in (18usize..=120).prop_flat_map(|n| (
            prop::collection::vec((-80i32..80).prop_map(|c| c as f64 / 8.0), n * 2),
            prop::collection::vec(-3.0f64..3.0, n),
        )),
        shift in (-50i32..50).prop_map(f64::from),
    ) {
        // Eighth-lattice coordinates and integer shifts keep the arithmetic
        // exact, so tie-breaking between equidistant neighbours is preserved.
        let a = SampleBatch::from_flat(coords.clone(), 2, Some(values.clone())).unwrap();
        let moved: Vec<f64> = coords.iter().map(|c| c + shift).collect();
        let b = SampleBatch::from_flat(moved, 2, Some(values.clone())).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * (1.0 + x.abs());
        prop_assert!(close(kl_entropy(&a, 3, NormKind::Euclidean).unwrap().nats, kl_entropy(&b, 3, NormKind::Euclidean).unwrap().nats));
        prop_assert!(close(ksg_conditional_entropy(&a, 3).unwrap().nats, ksg_conditional_entropy(&b, 3).unwrap().nats));
        let (ra, rb) = (vcse_reward(&a, &values, 3).unwrap(), vcse_reward(&b, &values, 3).unwrap());
        for (x, y) in ra.iter().zip(&rb) {
            prop_assert!(close(*x, *y));
        }
    }

    #[test]
    fn scaling_shifts_kl_by_d_log_a(coords in (20usize..100).prop_flat_map(|n| prop::collection::vec(-5.0f64..5.0, n * 3)), a in 0.01f64..100.0) {
        let base = SampleBatch::from_flat(coords.clone(), 3, None).unwrap();
        let scaled = SampleBatch::from_flat(coords.iter().map(|c| c * a).collect(), 3, None).unwrap();
        let h0 = kl_entropy(&base, 4, NormKind::Euclidean).unwrap();
        prop_assume!(h0.floored == 0);
        let h1 = kl_entropy(&scaled, 4, NormKind::Euclidean).unwrap();
        prop_assert!((h1.nats - h0.nats - 3.0 * a.ln()).abs() < 1e-9);
    }

    #[test]
    fn duplicate_states_have_zero_se(row in prop::collection::vec(-5.0f64..5.0, 1..4), n in 6usize..40) {
        let d = row.len();
        let coords: Vec<f64> = (0..n).flat_map(|_| row.clone()).collect();
        let b = SampleBatch::from_flat(coords, d, None).unwrap();
        prop_assert!(se_reward(&b, 5).unwrap().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn count_within_ignores_order(mut values in prop::collection::vec(-3.0f64..3.0, 2..64), eps in 0.0f64..4.0, seed: u64) {
        let center = values[0];
        let before = count_within(&values, 0, eps);
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..values.len()).rev() {
            let j = r.random_range(0..=i);
            values.swap(i, j);
        }
        let pos = values.iter().position(|&v| v == center).unwrap();
        prop_assert_eq!(count_within(&values, pos, eps), before);
    }
}
