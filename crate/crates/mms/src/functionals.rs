//! Semicharacter functionals and the scalar gauges built from them.
//!
//! A semicharacter is indexed by a finite symmetric array `A = (a_ij)` of
//! nonnegative coefficients over `1 <= i < j <= n` (stored 0-based here). Its
//! value on a space is the expected exponential of the weighted sum of
//! pairwise distances between `n` points drawn i.i.d. from the measure:
//!
//! ```text
//! chi_A(X) = E[ exp( - sum_{i<j} a_ij * d(xi, xj) ) ]
//! ```
//!
//! The defining property is multiplicativity: `chi_A(X ⊞ Y) =
//! chi_A(X) * chi_A(Y)`, which turns the box-plus semigroup into ordinary
//! multiplication on `(0, 1]` and makes the family separate distributions of
//! random spaces. The distinguished empty array evaluates to 1 identically.
//!
//! On top of `chi` this module provides the scalar gauges `chi1`, `D = -log
//! chi1`, `D_A = -log chi_A`, the truncated-distance gauge `Delta`, exponent
//! bounds comparing `chi_A` against powers of `chi1`, and the two-sided
//! `kappa` chain linking `Delta` to `D`.

use crate::num;
use crate::space::FiniteMMSpace;
use crate::stochastic::{stream_rng, LaplaceEstimate};
use crate::{Error, Result};
use rayon::prelude::*;

/// A finite symmetric array of nonnegative exponent coefficients, or the
/// distinguished empty spec (which evaluates to 1 on every space).
///
/// Entries are stored 0-based as `(i, j, a)` with `i < j < order`. The JSON
/// interchange format is 1-based; conversion happens in [`crate::json`].
#[derive(Debug, Clone, PartialEq)]
pub struct Semicharacter {
    order: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Semicharacter {
    /// The empty spec: evaluates to 1 on every space.
    pub fn empty() -> Self {
        Semicharacter {
            order: 0,
            entries: Vec::new(),
        }
    }

    /// Builds a spec of the given order (number of sampled points, >= 2) from
    /// 0-based entries `(i, j, a)` with `i < j < order` and `a >= 0` finite.
    /// At least one coefficient must be strictly positive; use [`empty`] for
    /// the trivial spec.
    ///
    /// [`empty`]: Semicharacter::empty
    pub fn new(order: usize, entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        if order == 0 {
            if !entries.is_empty() {
                return Err(Error::BadSpec(
                    "order 0 denotes the empty spec and admits no entries".into(),
                ));
            }
            return Ok(Self::empty());
        }
        if order < 2 {
            return Err(Error::BadSpec(
                "a nonempty semicharacter needs order >= 2".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        let mut any_positive = false;
        for &(i, j, a) in &entries {
            if i >= j || j >= order {
                return Err(Error::BadSpec(format!(
                    "entry ({i},{j}) out of range for order {order}: need i < j < order"
                )));
            }
            if !a.is_finite() || a < 0.0 {
                return Err(Error::BadSpec(format!(
                    "coefficient a[{i}][{j}] = {a} must be finite and nonnegative"
                )));
            }
            if !seen.insert((i, j)) {
                return Err(Error::BadSpec(format!("duplicate entry for pair ({i},{j})")));
            }
            any_positive |= a > 0.0;
        }
        if !any_positive {
            return Err(Error::BadSpec(
                "at least one coefficient must be positive (use the empty spec otherwise)".into(),
            ));
        }
        let mut entries = entries;
        entries.sort_by_key(|&(i, j, _)| (i, j));
        Ok(Semicharacter { order, entries })
    }

    /// The order-2 spec with the single coefficient `a` on the pair (0, 1).
    pub fn single(a: f64) -> Result<Self> {
        Semicharacter::new(2, vec![(0, 1, a)])
    }

    /// The spec behind `chi1`: a single unit coefficient on one pair.
    pub fn standard() -> Self {
        Semicharacter::single(1.0).expect("the unit spec is valid")
    }

    /// Number of points drawn per evaluation (0 for the empty spec).
    pub fn order(&self) -> usize {
        self.order
    }

    /// The 0-based entries, sorted by pair.
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// True for the distinguished empty spec.
    pub fn is_empty(&self) -> bool {
        self.order == 0
    }

    /// Sum of all coefficients.
    pub fn coefficient_sum(&self) -> f64 {
        self.entries.iter().map(|e| e.2).sum()
    }
}

/// Number of enumeration terms `|X|^order` as a u128 (no overflow for any
/// realistic input).
fn term_count(a: &Semicharacter, x: &FiniteMMSpace) -> u128 {
    (x.n() as u128).saturating_pow(a.order() as u32)
}

pub(crate) fn check_budget(a: &Semicharacter, x: &FiniteMMSpace, budget: u64) -> Result<()> {
    let terms = term_count(a, x);
    if terms > budget as u128 {
        return Err(Error::BudgetExceeded {
            terms,
            budget,
        });
    }
    Ok(())
}

/// Exact semicharacter value by full enumeration of `|X|^order` tuples.
///
/// Errors with [`Error::BudgetExceeded`] when the enumeration would exceed
/// the default term budget; use [`chi_monte_carlo`] in that regime.
pub fn chi(a: &Semicharacter, x: &FiniteMMSpace) -> Result<f64> {
    chi_budget(a, x, num::CHI_TERM_BUDGET)
}

/// As [`chi`] with an explicit term budget.
pub fn chi_budget(a: &Semicharacter, x: &FiniteMMSpace, budget: u64) -> Result<f64> {
    if a.is_empty() {
        return Ok(1.0);
    }
    check_budget(a, x, budget)?;
    Ok(chi_scaled_unchecked(a, x, 1.0))
}

/// `chi(A, scale(s, X))` without materializing the scaled space. The caller
/// is responsible for the term budget ([`chi`] wraps this with the check).
/// `s = +inf` is allowed and gives the large-scale limit.
pub(crate) fn chi_scaled_unchecked(a: &Semicharacter, x: &FiniteMMSpace, s: f64) -> f64 {
    1.0 - chi_complement_scaled(a, x, s)
}

/// `1 - chi(A, scale(s, X))`, computed without cancellation (important for
/// small `s`, where `chi` is close to 1). Enumerates `|X|^order` tuples; the
/// caller is responsible for the term budget.
pub(crate) fn chi_complement_scaled(a: &Semicharacter, x: &FiniteMMSpace, s: f64) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let k = a.order();
    // adj[depth] lists the (earlier index, coefficient) pairs that become
    // active when the tuple entry at `depth` is chosen.
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); k];
    for &(i, j, aij) in a.entries() {
        if aij > 0.0 {
            adj[j].push((i, aij));
        }
    }

    fn rec(
        x: &FiniteMMSpace,
        adj: &[Vec<(usize, f64)>],
        s: f64,
        depth: usize,
        tuple: &mut Vec<usize>,
        wprod: f64,
        esum: f64,
    ) -> f64 {
        if depth == adj.len() {
            // -expm1(-esum) = 1 - exp(-esum), exact near esum = 0.
            return wprod * -(-esum).exp_m1();
        }
        let mut acc = 0.0;
        for p in 0..x.n() {
            let mut add = 0.0;
            for &(i, aij) in &adj[depth] {
                let d = x.d(tuple[i], p);
                // Skip exact zeros so that s = +inf contributes 0, not NaN.
                if d > 0.0 {
                    add += aij * (s * d);
                }
            }
            tuple.push(p);
            acc += rec(x, adj, s, depth + 1, tuple, wprod * x.weight(p), esum + add);
            tuple.pop();
        }
        acc
    }

    let terms = term_count(a, x);
    if terms > 4096 {
        // Parallelize over the outermost tuple index; the pairwise reduction
        // over a position-indexed vector keeps the result independent of the
        // worker count.
        let parts: Vec<f64> = (0..x.n())
            .into_par_iter()
            .map(|p| {
                let mut tuple = vec![p];
                rec(x, &adj, s, 1, &mut tuple, x.weight(p), 0.0)
            })
            .collect();
        num::pairwise_sum(&parts)
    } else {
        let parts: Vec<f64> = (0..x.n())
            .map(|p| {
                let mut tuple = vec![p];
                rec(x, &adj, s, 1, &mut tuple, x.weight(p), 0.0)
            })
            .collect();
        num::pairwise_sum(&parts)
    }
}

/// Expected value of `sum a_ij * d(xi, xj)` under i.i.d. sampling: the linear
/// coefficient of `1 - chi_A(scale(t, X))` at `t = 0`. Because the tuple
/// entries are i.i.d., every pair has the same expected distance, so this is
/// `coefficient_sum * mean_pair_distance`.
pub(crate) fn chi_linear_coefficient(a: &Semicharacter, x: &FiniteMMSpace) -> f64 {
    a.coefficient_sum() * mean_pair_distance(x)
}

/// `E[d(xi, xj)]` for two independent draws (diagonal included).
pub fn mean_pair_distance(x: &FiniteMMSpace) -> f64 {
    let n = x.n();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += x.weight(i) * x.weight(j) * x.d(i, j);
        }
    }
    acc
}

/// `chi1(X) = E[exp(-d(x1, x2))]`, the order-2 unit semicharacter.
pub fn chi1(x: &FiniteMMSpace) -> Result<f64> {
    chi(&Semicharacter::standard(), x)
}

/// `D(X) = -log chi1(X)`; nonnegative and additive under box-plus.
pub fn big_d(x: &FiniteMMSpace) -> Result<f64> {
    Ok((-chi1(x)?.ln()).max(0.0))
}

/// `D_A(X) = -log chi_A(X)`; 0 for the empty spec.
pub fn big_d_a(a: &Semicharacter, x: &FiniteMMSpace) -> Result<f64> {
    Ok((-chi(a, x)?.ln()).max(0.0))
}

/// `Delta(X) = E[min(d(x1, x2), 1)]`, the truncated expected distance.
pub fn delta(x: &FiniteMMSpace) -> f64 {
    let n = x.n();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += x.weight(i) * x.weight(j) * x.d(i, j).min(1.0);
        }
    }
    acc
}

/// Unbiased Monte Carlo estimator of [`chi`]: draws `order`-tuples i.i.d.
/// from the measure and averages the exponential weight. One RNG stream is
/// derived per sample index, so the estimate is independent of worker count.
pub fn chi_monte_carlo(
    a: &Semicharacter,
    x: &FiniteMMSpace,
    nsamples: u64,
    seed: u64,
) -> Result<LaplaceEstimate> {
    if nsamples < 2 {
        return Err(Error::BadSpec(
            "chi_monte_carlo needs at least 2 samples for a standard error".into(),
        ));
    }
    let k = a.order();
    let values: Vec<f64> = (0..nsamples)
        .into_par_iter()
        .map(|idx| {
            let mut rng = stream_rng(seed, idx);
            let tuple: Vec<usize> = (0..k).map(|_| x.sample_index(&mut rng)).collect();
            let mut esum = 0.0;
            for &(i, j, aij) in a.entries() {
                esum += aij * x.d(tuple[i], tuple[j]);
            }
            (-esum).exp()
        })
        .collect();
    let (mean, stderr) = num::mean_stderr(&values);
    Ok(LaplaceEstimate {
        mean,
        stderr,
        nsamples: values.len(),
    })
}

/// Exponents `(hi, lo)` such that `chi1(X)^hi <= chi_A(X) <= chi1(X)^lo`
/// holds for every space `X`:
///
/// * `lo = min(max a_ij, 1)` — a single pair already forces `chi_A` below
///   `chi1^lo` by Jensen's inequality, and exponents above 1 cannot be
///   pushed past 1 in this direction;
/// * `hi = max(c, 1) * (order - 1)` with `c` the largest symmetrized row sum
///   of `A` — decomposing the tuple sum along a star at the heaviest index
///   and applying the triangle inequality gives the other direction.
pub fn chi_exponent_bounds(a: &Semicharacter) -> Result<(f64, f64)> {
    if a.is_empty() {
        return Err(Error::BadSpec(
            "exponent bounds need a nonempty semicharacter".into(),
        ));
    }
    let n = a.order();
    let mut row_sums = vec![0.0f64; n];
    let mut max_entry = 0.0f64;
    for &(i, j, aij) in a.entries() {
        row_sums[i] += aij;
        row_sums[j] += aij;
        max_entry = max_entry.max(aij);
    }
    let c = row_sums.iter().cloned().fold(0.0f64, f64::max);
    let hi = c.max(1.0) * (n as f64 - 1.0);
    let lo = max_entry.min(1.0);
    Ok((hi, lo))
}

/// Result of [`check_kappa_chain`]: the two-sided comparison of `Delta`
/// against `min(D, 1)`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct KappaChainReport {
    /// `kappa_lo * min(D(X), 1)`.
    pub lower: f64,
    /// `Delta(X)`.
    pub delta: f64,
    /// `kappa_hi * min(D(X), 1)`.
    pub upper: f64,
    /// Whether `lower <= delta <= upper` (tiny float slack applied).
    pub pass: bool,
}

/// Verifies the chain `kappa_lo * (D ∧ 1) <= Delta <= kappa_hi * (D ∧ 1)`
/// with `kappa_lo = (1 - 1/e)/2` and `kappa_hi = 1/(1 - 1/e)`.
pub fn check_kappa_chain(x: &FiniteMMSpace) -> Result<KappaChainReport> {
    let d_min = big_d(x)?.min(1.0);
    let delta = delta(x);
    let lower = num::kappa_lo() * d_min;
    let upper = num::kappa_hi() * d_min;
    let slack = 1e-12;
    let pass = lower <= delta + slack && delta <= upper + slack;
    Ok(KappaChainReport {
        lower,
        delta,
        upper,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(p: f64, d: f64) -> FiniteMMSpace {
        FiniteMMSpace::two_point(p, d).unwrap()
    }

    /// A band space: off-diagonal distances inside [1, 2] always satisfy the
    /// triangle inequality, so this is valid for every n.
    fn band(n: usize) -> FiniteMMSpace {
        let mut dist = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 1.0 + ((i * 7 + j * 13) % 10) as f64 * 0.1;
                dist[i][j] = v;
                dist[j][i] = v;
            }
        }
        let weights = vec![1.0 / n as f64; n];
        FiniteMMSpace::new(dist, weights).unwrap()
    }

    #[test]
    fn two_point_closed_form_matches_enumeration() {
        for &(p, r, a) in &[
            (0.5, 1.0, 1.0),
            (0.3, 2.0, 0.5),
            (0.9, 0.25, 2.0),
            (0.5, 1.0, 0.5),
        ] {
            let spec = Semicharacter::single(a).unwrap();
            let got = chi(&spec, &t(p, r)).unwrap();
            let want = (1.0 - p) * (1.0 - p) + p * p + 2.0 * p * (1.0 - p) * (-a * r).exp();
            assert!((got - want).abs() < 1e-14, "p={p} r={r} a={a}");
        }
    }

    #[test]
    fn empty_spec_evaluates_to_one() {
        let e = Semicharacter::empty();
        assert_eq!(chi(&e, &t(0.5, 1.0)).unwrap(), 1.0);
        assert_eq!(chi(&e, &FiniteMMSpace::trivial()).unwrap(), 1.0);
        assert_eq!(big_d_a(&e, &t(0.3, 2.0)).unwrap(), 0.0);
    }

    #[test]
    fn frozen_instance_values() {
        // chi1(T(0.5;1)) = (1 + e^{-1})/2.
        let x = t(0.5, 1.0);
        let c = chi1(&x).unwrap();
        assert!((c - 0.5 * (1.0 + (-1.0f64).exp())).abs() < 1e-15);
        assert!((c - 0.683940).abs() < 1e-6);

        // Multiplicativity on the product instance.
        let prod = x.boxplus(&x).unwrap();
        let cp = chi1(&prod).unwrap();
        assert!((cp - c * c).abs() < 1e-14);
        assert!((cp - 0.467774).abs() < 1e-6);

        // D is additive exactly (to 1e-12).
        assert!((big_d(&prod).unwrap() - 2.0 * big_d(&x).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn delta_frozen_values() {
        assert!((delta(&t(0.5, 1.0)) - 0.5).abs() < 1e-15);
        assert!((delta(&t(0.5, 0.2)) - 0.1).abs() < 1e-15);
        assert_eq!(delta(&FiniteMMSpace::trivial()), 0.0);
        // Truncation at 1: distance 3 counts as 1.
        assert!((delta(&t(0.5, 3.0)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn order_three_spec_on_two_points() {
        // Full triangle spec on T(0.5;1): (2 + 6 e^{-2}) / 8 by direct count.
        let spec = Semicharacter::new(3, vec![(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)]).unwrap();
        let got = chi(&spec, &t(0.5, 1.0)).unwrap();
        let want = 0.25 + 0.75 * (-2.0f64).exp();
        assert!((got - want).abs() < 1e-14);
    }

    #[test]
    fn budget_gate_reports_term_count() {
        let spec = Semicharacter::new(4, vec![(0, 1, 1.0)]).unwrap();
        let big = band(60);
        match chi(&spec, &big) {
            Err(Error::BudgetExceeded {
                terms,
                budget,
            }) => {
                assert_eq!(terms, 12_960_000);
                assert_eq!(budget, num::CHI_TERM_BUDGET);
            }
            other => panic!("expected BudgetExceeded, got {other:?}"),
        }
        assert!(chi(&spec, &big).unwrap_err().is_budget());
    }

    #[test]
    fn monte_carlo_is_exact_on_the_trivial_space() {
        let est = chi_monte_carlo(
            &Semicharacter::standard(),
            &FiniteMMSpace::trivial(),
            100,
            7,
        )
        .unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn monte_carlo_matches_exact_value() {
        let x = t(0.5, 1.0);
        let est = chi_monte_carlo(&Semicharacter::standard(), &x, 100_000, 42).unwrap();
        let exact = chi1(&x).unwrap();
        assert!(est.stderr > 0.0);
        assert!(
            (est.mean - exact).abs() <= 3.0 * est.stderr,
            "mean {} exact {} stderr {}",
            est.mean,
            exact,
            est.stderr
        );
    }

    #[test]
    fn monte_carlo_empty_spec_is_exactly_one() {
        let est = chi_monte_carlo(&Semicharacter::empty(), &t(0.3, 1.0), 50, 1).unwrap();
        assert_eq!((est.mean, est.stderr), (1.0, 0.0));
    }

    #[test]
    fn monte_carlo_needs_two_samples() {
        assert!(chi_monte_carlo(&Semicharacter::standard(), &t(0.5, 1.0), 1, 0).is_err());
    }

    #[test]
    fn spec_validation_rejects_malformed_input() {
        assert!(Semicharacter::new(2, vec![]).is_err());
        assert!(Semicharacter::new(1, vec![]).is_err());
        assert!(Semicharacter::new(2, vec![(1, 0, 1.0)]).is_err());
        assert!(Semicharacter::new(2, vec![(0, 2, 1.0)]).is_err());
        assert!(Semicharacter::new(2, vec![(0, 1, -0.5)]).is_err());
        assert!(Semicharacter::new(2, vec![(0, 1, f64::NAN)]).is_err());
        assert!(Semicharacter::new(3, vec![(0, 1, 1.0), (0, 1, 2.0)]).is_err());
        assert!(Semicharacter::new(0, vec![(0, 1, 1.0)]).is_err());
        // Zero coefficients are fine as long as one entry is positive.
        assert!(Semicharacter::new(3, vec![(0, 1, 0.0), (1, 2, 1.0)]).is_ok());
    }

    #[test]
    fn exponent_bounds_examples() {
        let half = Semicharacter::single(0.5).unwrap();
        assert_eq!(chi_exponent_bounds(&half).unwrap(), (1.0, 0.5));

        let unit = Semicharacter::standard();
        assert_eq!(chi_exponent_bounds(&unit).unwrap(), (1.0, 1.0));

        let triangle =
            Semicharacter::new(3, vec![(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)]).unwrap();
        assert_eq!(chi_exponent_bounds(&triangle).unwrap(), (4.0, 1.0));

        assert!(chi_exponent_bounds(&Semicharacter::empty()).is_err());
    }

    #[test]
    fn exponent_sandwich_frozen_instance() {
        // chi_{0.5}(T(0.5;1)) = (1 + e^{-1/2})/2 = 0.803265...; the sandwich
        // chi1^1 <= chi_{0.5} <= chi1^{0.5} pins it between 0.683940 and
        // 0.827006.
        let x = t(0.5, 1.0);
        let half = Semicharacter::single(0.5).unwrap();
        let v = chi(&half, &x).unwrap();
        assert!((v - 0.803265).abs() < 1e-6);
        let c1 = chi1(&x).unwrap();
        let (hi, lo) = chi_exponent_bounds(&half).unwrap();
        assert!(c1.powf(hi) <= v && v <= c1.powf(lo));
        assert!((c1.powf(lo) - 0.827006).abs() < 1e-6);
    }

    #[test]
    fn kappa_chain_frozen_instance() {
        let report = check_kappa_chain(&t(0.5, 1.0)).unwrap();
        assert!(report.pass);
        assert!((report.delta - 0.5).abs() < 1e-15);
        assert!((report.lower - 0.120067).abs() < 1e-5);
        assert!((report.upper - 0.600971).abs() < 1e-5);
        assert!(report.lower <= report.delta && report.delta <= report.upper);
    }

    #[test]
    fn kappa_chain_trivial_space() {
        let report = check_kappa_chain(&FiniteMMSpace::trivial()).unwrap();
        assert!(report.pass);
        assert_eq!(report.delta, 0.0);
        assert_eq!(report.lower, 0.0);
        assert_eq!(report.upper, 0.0);
    }

    #[test]
    fn gauges_are_bounded_by_diameter() {
        for n in [2usize, 3, 5, 8] {
            let x = band(n);
            assert!(big_d(&x).unwrap() <= x.diam() + 1e-12);
            assert!(delta(&x) <= x.diam() + 1e-12);
        }
    }

    #[test]
    fn complement_is_cancellation_free_at_small_scale() {
        let x = t(0.5, 1.0);
        let a = Semicharacter::standard();
        let s = 1e-9;
        let got = chi_complement_scaled(&a, &x, s);
        // 1 - chi(scale(s, X)) = 2 p (1-p) (1 - e^{-s}) ~= 0.5 * s.
        let want = 0.5 * -(-s).exp_m1();
        assert!((got - want).abs() < 1e-22, "got {got:e} want {want:e}");
    }

    #[test]
    fn infinite_scale_limit_is_well_defined() {
        // As the scale grows, only coincident tuples survive.
        let x = t(0.3, 1.0);
        let a = Semicharacter::standard();
        let v = chi_scaled_unchecked(&a, &x, f64::INFINITY);
        let want = 0.7 * 0.7 + 0.3 * 0.3;
        assert!((v - want).abs() < 1e-15);
    }

    #[test]
    fn linear_coefficient_matches_finite_differences() {
        let x = band(4);
        let a = Semicharacter::new(3, vec![(0, 1, 0.7), (1, 2, 0.4)]).unwrap();
        let h = 1e-6;
        let fd = chi_complement_scaled(&a, &x, h) / h;
        let exact = chi_linear_coefficient(&a, &x);
        assert!((fd - exact).abs() < 1e-4 * exact);
    }
}
