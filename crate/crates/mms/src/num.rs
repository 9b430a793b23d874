//! Centralized tolerances and deterministic numeric helpers.
//!
//! Every approximate comparison in the crate routes through the constants
//! here so that the acceptance tolerances are pinned in one place.

/// Relative tolerance for metric validation, isomorphism matching, and
/// factorization equality checks. Comparisons use a scale floor of 1, so for
/// distances below 1 this acts as an absolute tolerance.
pub const METRIC_TOL: f64 = 1e-9;

/// Absolute tolerance for "weights sum to one".
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Quantum used when rounding (dist, weights) for canonical keys. Two spaces
/// compare key-equal exactly when their quantized data agree up to relabeling.
pub const KEY_QUANTUM: f64 = 1e-9;

/// Tolerance for exact-arithmetic identities routed through enumeration
/// (semicharacter multiplicativity and friends).
pub const MULT_TOL: f64 = 1e-10;

/// Absolute tolerance on coupling marginals in certificates.
pub const COUPLING_TOL: f64 = 1e-10;

/// Default cap on the number of points a box-plus product may have.
pub const DEFAULT_SIZE_BUDGET: usize = 4096;

/// Default cap on the number of tuples enumerated by the exact semicharacter.
pub const CHI_TERM_BUDGET: u64 = 10_000_000;

/// Largest space the factor-split search accepts.
pub const FACTOR_MAX_POINTS: usize = 64;

/// Largest support for the closed-set Prohorov oracle (2^n subsets).
pub const PROHOROV_ORACLE_MAX: usize = 12;

/// Relative tolerance for the stable-law Laplace quadrature.
pub const QUAD_REL_TOL: f64 = 1e-8;

/// Default z-score threshold for the statistical equality tests.
pub const DEFAULT_Z: f64 = 4.0;

/// A candidate factor split whose worst residual lies between `METRIC_TOL`
/// and this value is reported as ambiguous rather than silently rejected.
pub const AMBIGUITY_TOL: f64 = 1e-6;

/// Lower constant of the chain  kappa_lo * min(D(X),1) <= Delta(X),
/// namely (1 - e^{-1}) * 1/2 (the admissible delta = 1/2 sits safely below
/// the sharp bound 1 - ln(2 - e^{-1}) ~= 0.51012).
pub fn kappa_lo() -> f64 {
    0.5 * (1.0 - (-1.0f64).exp())
}

/// Upper constant of the chain  Delta(X) <= kappa_hi * min(D(X),1),
/// namely 1 / (1 - e^{-1}).
pub fn kappa_hi() -> f64 {
    1.0 / (1.0 - (-1.0f64).exp())
}

/// Scale-aware approximate equality: |a - b| <= tol * max(1, |a|, |b|).
pub fn approx_eq_tol(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

/// Approximate equality at the crate-wide metric tolerance.
pub fn approx_eq(a: f64, b: f64) -> bool {
    approx_eq_tol(a, b, METRIC_TOL)
}

/// Deterministic pairwise summation. The result depends only on the order of
/// `v`, never on thread count, and keeps error growth logarithmic.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1..=8 => v.iter().sum(),
        n => {
            let (a, b) = v.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Mean, sample standard error pair via deterministic two-pass summation.
/// Returns (mean, stderr); stderr is 0 when `v.len() < 2`.
pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = pairwise_sum(v) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_matches_naive_on_small_inputs() {
        let v: Vec<f64> = (0..100).map(|i| (i as f64) * 0.125).collect();
        let naive: f64 = v.iter().sum();
        assert!((pairwise_sum(&v) - naive).abs() < 1e-9);
    }

    #[test]
    fn kappa_constants_match_their_closed_forms() {
        // kappa_lo = (1 - 1/e)/2, kappa_hi = 1/(1 - 1/e); the decimal values
        // quoted in the docs are 0.31606 and 1.58198.
        assert!((kappa_lo() - 0.3160602794142788).abs() < 1e-15);
        assert!((kappa_hi() - 1.5819767068693265).abs() < 1e-15);
        assert!((kappa_lo() * kappa_hi() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn approx_eq_uses_relative_scale_above_one() {
        assert!(approx_eq(1000.0, 1000.0 + 5e-7));
        assert!(!approx_eq(1000.0, 1000.0 + 5e-5));
        assert!(approx_eq(1e-12, 0.0));
        assert!(!approx_eq(1e-7, 0.0));
    }

    #[test]
    fn mean_stderr_handles_degenerate_inputs() {
        assert_eq!(mean_stderr(&[]), (0.0, 0.0));
        assert_eq!(mean_stderr(&[2.5]), (2.5, 0.0));
        let (m, se) = mean_stderr(&[1.0, 1.0, 1.0]);
        assert_eq!(m, 1.0);
        assert_eq!(se, 0.0);
    }
}
