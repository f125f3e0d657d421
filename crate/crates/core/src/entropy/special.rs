//! Special functions used by the kNN estimators.

use super::{EstimatorError, NormKind};

/// B_{2k} / (2k) for k = 1..7, the coefficients of the asymptotic series
/// ψ(x) ≈ ln x − 1/(2x) − Σ B_{2k} / (2k x^{2k}).
const ASYMPTOTIC: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
];

/// Below this the recurrence ψ(x) = ψ(x + 1) − 1/x is applied first.
const ASYMPTOTIC_THRESHOLD: f64 = 10.0;

/// Digamma function ψ(x) = d/dx ln Γ(x) for x > 0.
///
/// Shifts x above 10 with the recurrence and evaluates a seven-term
/// asymptotic series there; absolute error is below 1e-13 on the positive axis.
pub fn digamma(x: f64) -> Result<f64, EstimatorError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(EstimatorError::Domain { function: "digamma", arg: x });
    }
    Ok(digamma_unchecked(x))
}

/// ψ(n) for a count-derived argument; callers guarantee n ≥ 1.
pub(crate) fn digamma_count(n: usize) -> f64 {
    debug_assert!(n >= 1);
    digamma_unchecked(n as f64)
}

fn digamma_unchecked(x: f64) -> f64 {
    let mut acc = 0.0;
    let mut x = x;
    while x < ASYMPTOTIC_THRESHOLD {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    let mut term = inv2;
    let mut series = 0.0;
    for c in ASYMPTOTIC {
        series += c * term;
        term *= inv2;
    }
    acc + x.ln() - 0.5 / x - series
}

/// ln Γ(1 + d/2) for integer d ≥ 0, evaluated exactly as a finite product.
fn ln_gamma_one_plus_half(d: usize) -> f64 {
    // Γ(1 + x) = x Γ(x), unrolled down to Γ(1) = 1 or Γ(1/2) = √π.
    let mut acc = 0.0;
    let mut x = d as f64 / 2.0;
    while x > 0.0 {
        acc += x.ln();
        x -= 1.0;
    }
    if d % 2 == 1 {
        acc += 0.5 * std::f64::consts::PI.ln();
    }
    acc
}

/// Log-volume of the d-dimensional unit ball, ln c_d.
///
/// Euclidean: π^{d/2} / Γ(1 + d/2). Maximum: the cube [−1, 1]^d, volume 2^d.
pub fn log_unit_ball_volume(d: usize, norm: NormKind) -> f64 {
    assert!(d >= 1, "dimension must be at least 1");
    match norm {
        NormKind::Euclidean => 0.5 * d as f64 * std::f64::consts::PI.ln() - ln_gamma_one_plus_half(d),
        NormKind::Maximum => d as f64 * std::f64::consts::LN_2,
    }
}
