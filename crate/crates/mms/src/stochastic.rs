//! Samplers and closed-form Laplace transforms for random metric measure
//! spaces: infinitely divisible laws driven by a finite Levy measure, stable
//! laws via the LePage series, thinning, discrete-stable counts, and the
//! statistical test harness that compares empirical semicharacter panels.
//!
//! Determinism contract: every sampler derives its randomness from a
//! [`ChaCha8Rng`] stream selected by `(seed, stream index)`; outer Monte
//! Carlo loops parallelize over the sample index with one stream per sample,
//! and all aggregation uses pairwise summation, so results are identical
//! across runs and independent of the worker pool size.
//!
//! A LePage sample is truncated by the expected-residual-diameter rule, and
//! the Laplace estimators compensate the truncation *exactly*: conditional
//! on the last arrival time `G`, the remaining arrivals form a unit Poisson
//! process on `(G, inf)`, and the generating-functional identity gives the
//! conditional expectation of the missing semicharacter factors in closed
//! form as `exp(-I(0, G^{-1/alpha}))`, where `I` is the same integrand the
//! quadrature oracle integrates. The estimator is therefore unbiased for
//! every truncation tolerance, not just asymptotically.

use crate::functionals::{self, Semicharacter};
use crate::num::{self, CHI_TERM_BUDGET, DEFAULT_SIZE_BUDGET, QUAD_REL_TOL};
use crate::space::{BoxSum, FiniteMMSpace};
use crate::{factor, Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Hard cap on the number of retained LePage terms in one sample.
const LEPAGE_TERM_CAP: u64 = 1_000_000;
/// Hard cap on the number of Poisson jumps in one Levy sample.
const LEVY_TERM_CAP: u64 = 4_000_000;

/// The RNG stream for a given (seed, index) pair; every independent sample
/// in a Monte Carlo loop gets its own index.
pub(crate) fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// Monte Carlo estimate of a Laplace functional value `E[chi_A]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LaplaceEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub nsamples: usize,
}

fn estimate_from_values(values: &[f64]) -> LaplaceEstimate {
    let (mean, stderr) = num::mean_stderr(values);
    LaplaceEstimate {
        mean,
        stderr,
        nsamples: values.len(),
    }
}

/// A finitely supported probability distribution on metric measure spaces.
#[derive(Debug, Clone)]
pub struct DiscreteDistribution {
    atoms: Vec<(FiniteMMSpace, f64)>,
}

impl DiscreteDistribution {
    /// Probabilities must be positive, finite, and sum to 1 within 1e-12.
    pub fn new(atoms: Vec<(FiniteMMSpace, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::BadSpec("distribution needs at least one atom".into()));
        }
        for (_, p) in &atoms {
            if !p.is_finite() || *p <= 0.0 {
                return Err(Error::BadSpec(format!(
                    "atom probability {p} must be positive and finite"
                )));
            }
        }
        let probs: Vec<f64> = atoms.iter().map(|(_, p)| *p).collect();
        let total = num::pairwise_sum(&probs);
        if (total - 1.0).abs() > num::WEIGHT_SUM_TOL {
            return Err(Error::BadSpec(format!(
                "atom probabilities sum to {total}, expected 1"
            )));
        }
        Ok(DiscreteDistribution { atoms })
    }

    pub fn atoms(&self) -> &[(FiniteMMSpace, f64)] {
        &self.atoms
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> &FiniteMMSpace {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (space, p) in &self.atoms {
            acc += p;
            if u < acc {
                return space;
            }
        }
        &self.atoms.last().expect("atoms nonempty").0
    }

    /// Expected mean pair distance under the distribution.
    fn mean_pair_distance(&self) -> f64 {
        let vals: Vec<f64> = self
            .atoms
            .iter()
            .map(|(z, p)| p * functionals::mean_pair_distance(z))
            .collect();
        num::pairwise_sum(&vals)
    }

    fn mean_diam(&self) -> f64 {
        let vals: Vec<f64> = self.atoms.iter().map(|(z, p)| p * z.diam()).collect();
        num::pairwise_sum(&vals)
    }
}

/// A finite Levy measure: finitely many nontrivial atoms with positive
/// finite masses (an empty list is the zero measure).
#[derive(Debug, Clone)]
pub struct LevyMeasure {
    atoms: Vec<(FiniteMMSpace, f64)>,
    total: f64,
}

impl LevyMeasure {
    pub fn new(atoms: Vec<(FiniteMMSpace, f64)>) -> Result<Self> {
        for (space, mass) in &atoms {
            if space.is_trivial() {
                return Err(Error::BadSpec(
                    "Levy measure atoms must be nontrivial spaces".into(),
                ));
            }
            if !mass.is_finite() || *mass <= 0.0 {
                return Err(Error::BadSpec(format!(
                    "atom mass {mass} must be positive and finite"
                )));
            }
        }
        let masses: Vec<f64> = atoms.iter().map(|(_, m)| *m).collect();
        let total = num::pairwise_sum(&masses);
        Ok(LevyMeasure { atoms, total })
    }

    pub fn atoms(&self) -> &[(FiniteMMSpace, f64)] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        self.total
    }

    fn sample_jump<R: Rng>(&self, rng: &mut R) -> &FiniteMMSpace {
        let u: f64 = rng.gen::<f64>() * self.total;
        let mut acc = 0.0;
        for (space, mass) in &self.atoms {
            acc += mass;
            if u < acc {
                return space;
            }
        }
        &self.atoms.last().expect("sampling an empty Levy measure").0
    }
}

/// Parameters of a stable law: index `alpha` in (0,1), a base distribution
/// with nontrivial atoms, and the truncation tolerance for the LePage series
/// (an expected residual diameter).
#[derive(Debug, Clone)]
pub struct StableSpec {
    alpha: f64,
    base: DiscreteDistribution,
    tail_tol: f64,
}

impl StableSpec {
    pub fn new(alpha: f64, base: DiscreteDistribution, tail_tol: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !tail_tol.is_finite() || tail_tol <= 0.0 {
            return Err(Error::BadSpec(format!(
                "tail tolerance {tail_tol} must be positive and finite"
            )));
        }
        if base.atoms().iter().any(|(z, _)| z.is_trivial()) {
            return Err(Error::BadSpec(
                "stable base atoms must be nontrivial spaces".into(),
            ));
        }
        Ok(StableSpec {
            alpha,
            base,
            tail_tol,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn base(&self) -> &DiscreteDistribution {
        &self.base
    }

    pub fn tail_tol(&self) -> f64 {
        self.tail_tol
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
        return Err(Error::BadSpec(format!(
            "stability index {alpha} must lie strictly inside (0, 1)"
        )));
    }
    Ok(())
}

fn check_nsamples(nsamples: usize) -> Result<()> {
    if nsamples == 0 {
        return Err(Error::BadSpec("need at least one sample".into()));
    }
    if nsamples as u64 >= (1u64 << 32) {
        return Err(Error::BadSpec(format!(
            "sample count {nsamples} exceeds the per-batch stream space"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Scalar samplers: ln-gamma, Poisson, positive stable
// ---------------------------------------------------------------------------

/// Lanczos approximation (g = 7, 9 terms), accurate to ~1e-13 for x > 0.
fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    debug_assert!(x > 0.0);
    let z = x;
    let mut s = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        s += c / (z - 1.0 + i as f64);
    }
    let t = z + 6.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z - 0.5) * t.ln() - t + s.ln()
}

/// Exact Poisson sampling: Knuth's product method below 30, Hormann's PTRS
/// transformed rejection above. Extremely large means (beyond 1e15, where
/// the relative fluctuation is below f64 resolution) return the rounded
/// mean.
fn sample_poisson<R: Rng>(rng: &mut R, lambda: f64) -> u64 {
    debug_assert!(lambda.is_finite() && lambda >= 0.0);
    if lambda == 0.0 {
        return 0;
    }
    if lambda > 1.0e15 {
        return lambda.round().min(u64::MAX as f64) as u64;
    }
    if lambda < 30.0 {
        let l = (-lambda).exp();
        let mut k = 0u64;
        let mut p = 1.0f64;
        loop {
            p *= rng.gen::<f64>();
            if p <= l {
                return k;
            }
            k += 1;
        }
    }
    // PTRS
    let b = 0.931 + 2.53 * lambda.sqrt();
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let v_r = 0.9277 - 3.6224 / (b - 2.0);
    let ln_lambda = lambda.ln();
    loop {
        let u = rng.gen::<f64>() - 0.5;
        let v = rng.gen::<f64>();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + lambda + 0.43).floor();
        if us >= 0.07 && v <= v_r {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if (v * inv_alpha / (a / (us * us) + b)).ln() <= k * ln_lambda - lambda - ln_gamma(k + 1.0)
        {
            return k as u64;
        }
    }
}

/// Kanter's exact representation of the standard positive alpha-stable law
/// (Laplace transform `exp(-lambda^alpha)`); rejection-free for alpha in
/// (0,1) apart from resampling boundary uniforms.
fn sample_positive_stable<R: Rng>(rng: &mut R, alpha: f64) -> f64 {
    let u = loop {
        let v: f64 = rng.gen();
        if v > 0.0 {
            break v * std::f64::consts::PI;
        }
    };
    let e = loop {
        let v: f64 = rng.gen();
        let e = -(1.0 - v).ln();
        if e > 0.0 {
            break e;
        }
    };
    let ln_a = (alpha * (alpha * u).sin().ln()
        + (1.0 - alpha) * ((1.0 - alpha) * u).sin().ln()
        - u.sin().ln())
        / (1.0 - alpha);
    (((1.0 - alpha) / alpha) * (ln_a - e.ln())).exp()
}

// ---------------------------------------------------------------------------
// Infinitely divisible laws (finite Levy measure)
// ---------------------------------------------------------------------------

/// One sample of the infinitely divisible law at time `t`, kept as a formal
/// product of jumps: `N ~ Poisson(t |nu|)` jumps drawn i.i.d. proportionally
/// to mass.
pub fn sample_levy_terms(nu: &LevyMeasure, t: f64, seed: u64) -> Result<BoxSum> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::BadSpec(format!("time {t} must be finite and nonnegative")));
    }
    let mut rng = stream_rng(seed, 0);
    let n = sample_poisson(&mut rng, t * nu.total_mass());
    if n > LEVY_TERM_CAP {
        return Err(Error::SizeOverflow {
            required: saturating_pow2(n),
            budget: DEFAULT_SIZE_BUDGET,
        });
    }
    let mut sum = BoxSum::trivial();
    for _ in 0..n {
        sum.push(nu.sample_jump(&mut rng).clone());
    }
    Ok(sum)
}

/// Materialized version of [`sample_levy_terms`]; errors with
/// `SizeOverflow` when the jump product exceeds the default size budget.
pub fn sample_levy(nu: &LevyMeasure, t: f64, seed: u64) -> Result<FiniteMMSpace> {
    sample_levy_terms(nu, t, seed)?.materialize(DEFAULT_SIZE_BUDGET)
}

/// Lower bound for the materialized point count of a product of `n`
/// nontrivial factors.
fn saturating_pow2(n: u64) -> u128 {
    if n >= 127 {
        u128::MAX
    } else {
        1u128 << n
    }
}

/// Exact Laplace functional of the infinitely divisible law:
/// `exp(-t * sum_k mass_k (1 - chi_A(Y_k)))`.
pub fn levy_laplace_exact(a: &Semicharacter, nu: &LevyMeasure, t: f64) -> Result<f64> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::BadSpec(format!("time {t} must be finite and nonnegative")));
    }
    let mut rate = 0.0;
    for (space, mass) in nu.atoms() {
        functionals::check_budget(a, space, CHI_TERM_BUDGET)?;
        rate += mass * functionals::chi_complement_scaled(a, space, 1.0);
    }
    Ok((-t * rate).exp())
}

// ---------------------------------------------------------------------------
// Stable laws (LePage series)
// ---------------------------------------------------------------------------

/// Drives one LePage walk: arrival times are cumulative unit exponentials,
/// each arrival carries an i.i.d. base draw, and the walk stops at the first
/// arrival where the expected residual diameter drops to `tail_tol`.
/// `visit` receives each `(atom, arrival time)`; the final arrival time is
/// returned. RNG consumption per term is fixed (one exponential, one atom
/// draw), so different consumers of the same stream see identical walks.
fn lepage_walk<R: Rng>(
    spec: &StableSpec,
    rng: &mut R,
    mut visit: impl FnMut(&FiniteMMSpace, f64) -> Result<()>,
) -> Result<f64> {
    let alpha = spec.alpha();
    let residual_coef = spec.base().mean_diam() * alpha / (1.0 - alpha);
    let mut gamma = 0.0f64;
    let mut terms = 0u64;
    loop {
        let e = loop {
            let v: f64 = rng.gen();
            let e = -(1.0 - v).ln();
            if e > 0.0 {
                break e;
            }
        };
        gamma += e;
        let z = spec.base().sample(rng);
        visit(z, gamma)?;
        terms += 1;
        if residual_coef * gamma.powf((alpha - 1.0) / alpha) <= spec.tail_tol() {
            return Ok(gamma);
        }
        if terms >= LEPAGE_TERM_CAP {
            return Err(Error::SizeOverflow {
                required: u128::MAX,
                budget: DEFAULT_SIZE_BUDGET,
            });
        }
    }
}

/// One truncated LePage sample as a formal product of scaled terms
/// `gamma_n^{-1/alpha} Z_n`.
pub fn sample_lepage_terms(spec: &StableSpec, seed: u64) -> Result<BoxSum> {
    let mut rng = stream_rng(seed, 0);
    let alpha = spec.alpha();
    let mut sum = BoxSum::trivial();
    lepage_walk(spec, &mut rng, |z, gamma| {
        sum.push(z.scale(gamma.powf(-1.0 / alpha))?);
        Ok(())
    })?;
    Ok(sum)
}

/// Materialized version of [`sample_lepage_terms`]. The point count grows
/// exponentially in the retained term count, so this only succeeds for
/// coarse tail tolerances; callers wanting Laplace statistics should use
/// [`lepage_laplace_empirical`], which never materializes.
pub fn sample_lepage(spec: &StableSpec, seed: u64) -> Result<FiniteMMSpace> {
    sample_lepage_terms(spec, seed)?.materialize(DEFAULT_SIZE_BUDGET)
}

/// Chi values of LePage samples over a panel, one stream per sample within
/// a batch, with the exact tail compensation described in the module docs.
/// Returns `matrix[panel_index][sample_index]`. `prescale` multiplies every
/// sampled space (used by [`stability_check`] to compare scaled laws).
pub(crate) fn lepage_chi_matrix(
    spec: &StableSpec,
    panel: &[Semicharacter],
    prescale: f64,
    nsamples: usize,
    seed: u64,
    batch: u64,
) -> Result<Vec<Vec<f64>>> {
    check_nsamples(nsamples)?;
    if !prescale.is_finite() || prescale <= 0.0 {
        return Err(Error::BadSpec(format!("prescale {prescale} must be positive")));
    }
    for a in panel {
        for (z, _) in spec.base().atoms() {
            functionals::check_budget(a, z, CHI_TERM_BUDGET)?;
        }
    }
    let alpha = spec.alpha();
    let per_sample: Vec<Vec<f64>> = (0..nsamples)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let mut rng = stream_rng(seed, (batch << 32) | i as u64);
            let mut vals = vec![1.0f64; panel.len()];
            let gamma = lepage_walk(spec, &mut rng, |z, g| {
                let s = prescale * g.powf(-1.0 / alpha);
                for (k, a) in panel.iter().enumerate() {
                    vals[k] *= functionals::chi_scaled_unchecked(a, z, s);
                }
                Ok(())
            })?;
            // Exact conditional expectation of the truncated factors.
            let t_end = prescale * gamma.powf(-1.0 / alpha);
            for (k, a) in panel.iter().enumerate() {
                let tail = stable_integral_truncated(a, alpha, spec.base(), t_end);
                vals[k] *= (-(prescale.powf(alpha) * tail)).exp();
            }
            Ok(vals)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut matrix = vec![vec![0.0f64; nsamples]; panel.len()];
    for (i, row) in per_sample.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            matrix[k][i] = *v;
        }
    }
    Ok(matrix)
}

/// Unbiased Monte Carlo estimates of `E[chi_A(prescale * Y)]` for every
/// panel entry, where `Y` follows the stable law of `spec`; pass
/// `prescale = 1` for the law itself.
pub fn lepage_laplace_empirical(
    spec: &StableSpec,
    panel: &[Semicharacter],
    prescale: f64,
    nsamples: usize,
    seed: u64,
) -> Result<Vec<LaplaceEstimate>> {
    let matrix = lepage_chi_matrix(spec, panel, prescale, nsamples, seed, 0)?;
    Ok(matrix.iter().map(|row| estimate_from_values(row)).collect())
}

// ---------------------------------------------------------------------------
// Stable Laplace transform by quadrature
// ---------------------------------------------------------------------------

/// Mixture complement `f(t) = sum_k p_k (1 - chi_A(t Z_k))`.
fn mixture_complement(a: &Semicharacter, base: &DiscreteDistribution, t: f64) -> f64 {
    base.atoms()
        .iter()
        .map(|(z, p)| p * functionals::chi_complement_scaled(a, z, t))
        .sum()
}

/// Head piece `int_0^T f(t) alpha t^{-alpha-1} dt` for `T <= 1`, after the
/// substitution `u = t^{1-alpha}` which removes the `t^{-alpha}`
/// singularity: `(alpha/(1-alpha)) int_0^{T^{1-alpha}} h(u^{1/(1-alpha)}) du`
/// with `h(t) = f(t)/t` extended analytically to `h(0)`.
fn stable_head_integral(
    a: &Semicharacter,
    alpha: f64,
    base: &DiscreteDistribution,
    t_end: f64,
) -> f64 {
    debug_assert!((0.0..=1.0).contains(&t_end));
    if t_end == 0.0 {
        return 0.0;
    }
    let h0: f64 = base
        .atoms()
        .iter()
        .map(|(z, p)| p * functionals::chi_linear_coefficient(a, z))
        .sum();
    let g = |u: f64| -> f64 {
        if u <= 0.0 {
            return h0;
        }
        let t = u.powf(1.0 / (1.0 - alpha));
        if t == 0.0 {
            h0
        } else {
            mixture_complement(a, base, t) / t
        }
    };
    alpha / (1.0 - alpha) * adaptive_simpson(&g, 0.0, t_end.powf(1.0 - alpha))
}

/// Tail piece `int_T^inf f(t) alpha t^{-alpha-1} dt` for `T >= 1`, after the
/// substitution `u = t^{-alpha}`: `int_0^{T^{-alpha}} f(u^{-1/alpha}) du`.
/// At `u = 0` the scale is IEEE infinity, which the semicharacter evaluator
/// handles exactly (diagonal tuples survive, everything else vanishes).
fn stable_tail_integral(
    a: &Semicharacter,
    alpha: f64,
    base: &DiscreteDistribution,
    u_hi: f64,
) -> f64 {
    debug_assert!((0.0..=1.0).contains(&u_hi));
    if u_hi == 0.0 {
        return 0.0;
    }
    let g = |u: f64| -> f64 { mixture_complement(a, base, u.powf(-1.0 / alpha)) };
    adaptive_simpson(&g, 0.0, u_hi)
}

/// Truncated exponent integral `I(0, T) = int_0^T f(t) alpha t^{-alpha-1} dt`.
fn stable_integral_truncated(
    a: &Semicharacter,
    alpha: f64,
    base: &DiscreteDistribution,
    t_end: f64,
) -> f64 {
    if t_end <= 0.0 {
        0.0
    } else if t_end <= 1.0 {
        stable_head_integral(a, alpha, base, t_end)
    } else {
        stable_head_integral(a, alpha, base, 1.0)
            + (stable_tail_integral(a, alpha, base, 1.0)
                - stable_tail_integral(a, alpha, base, t_end.powf(-alpha)))
    }
}

/// Exact (to quadrature tolerance) Laplace functional of the stable law:
/// `exp(-int_0^inf sum_k p_k (1 - chi_A(t Z_k)) alpha t^{-alpha-1} dt)`.
pub fn stable_laplace_quadrature(
    a: &Semicharacter,
    alpha: f64,
    base: &DiscreteDistribution,
) -> Result<f64> {
    check_alpha(alpha)?;
    if a.is_empty() {
        return Ok(1.0);
    }
    for (z, _) in base.atoms() {
        functionals::check_budget(a, z, CHI_TERM_BUDGET)?;
    }
    let total =
        stable_head_integral(a, alpha, base, 1.0) + stable_tail_integral(a, alpha, base, 1.0);
    Ok((-total).exp())
}

/// Adaptive Simpson quadrature with Richardson correction; relative
/// tolerance [`QUAD_REL_TOL`] against the first whole-interval estimate.
fn adaptive_simpson(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let mid = 0.5 * (lo + hi);
    let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
    let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    let tol = QUAD_REL_TOL * whole.abs().max(1e-12);
    simpson_rec(f, lo, hi, flo, fmid, fhi, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    flo: f64,
    fmid: f64,
    fhi: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let mid = 0.5 * (lo + hi);
    let lm = 0.5 * (lo + mid);
    let rm = 0.5 * (mid + hi);
    let (flm, frm) = (f(lm), f(rm));
    let left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
    let right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, lo, mid, flo, flm, fmid, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, mid, hi, fmid, frm, fhi, right, 0.5 * tol, depth - 1)
}

// ---------------------------------------------------------------------------
// Thinning
// ---------------------------------------------------------------------------

/// Independently keeps each prime factor copy with probability `p` and
/// rebuilds the product. `thin(X, 1)` is isomorphic to `X`; `thin(X, 0)` is
/// the trivial space; the result always divides `X`.
pub fn thin(x: &FiniteMMSpace, p: f64, seed: u64) -> Result<FiniteMMSpace> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::BadSpec(format!(
            "retention probability {p} must lie in [0, 1]"
        )));
    }
    let f = factor::factorize(x)?;
    let mut rng = stream_rng(seed, 0);
    let budget = x.n().max(DEFAULT_SIZE_BUDGET);
    let mut acc = FiniteMMSpace::trivial();
    for (space, mult) in f.iter() {
        let mut kept = 0u32;
        for _ in 0..mult {
            // gen() < p gives exact semantics at p = 0 (never) and p = 1
            // (always, since gen() < 1).
            if rng.gen::<f64>() < p {
                kept += 1;
            }
        }
        if kept > 0 {
            acc = acc.boxplus_budget(&space.boxplus_pow_budget(kept, budget)?, budget)?;
        }
    }
    Ok(acc)
}

/// Exact Laplace functional of the thinned law:
/// `prod_k (1 - p + p chi_A(Y_k))^{m_k}` over the factorization of `X`.
pub fn thinning_laplace_exact(a: &Semicharacter, x: &FiniteMMSpace, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::BadSpec(format!(
            "retention probability {p} must lie in [0, 1]"
        )));
    }
    let f = factor::factorize(x)?;
    let mut value = 1.0f64;
    for (space, mult) in f.iter() {
        let chi = functionals::chi_budget(a, space, CHI_TERM_BUDGET)?;
        value *= (1.0 - p + p * chi).powi(mult as i32);
    }
    Ok(value)
}

// ---------------------------------------------------------------------------
// Discrete stable counts and spaces
// ---------------------------------------------------------------------------

/// A discrete-stable count `N` with pgf `E[s^N] = exp(-c (1-s)^alpha)`,
/// sampled exactly as Poisson mixed over `c^{1/alpha}` times a standard
/// positive stable variate.
pub fn sample_discrete_stable_count(alpha: f64, c: f64, seed: u64) -> Result<u64> {
    check_alpha(alpha)?;
    if !c.is_finite() || c < 0.0 {
        return Err(Error::BadSpec(format!(
            "rate {c} must be finite and nonnegative"
        )));
    }
    if c == 0.0 {
        return Ok(0);
    }
    let mut rng = stream_rng(seed, 0);
    let s = sample_positive_stable(&mut rng, alpha);
    let lambda = c.powf(1.0 / alpha) * s;
    Ok(sample_poisson(&mut rng, lambda))
}

/// `Y^{boxplus N}` with a discrete-stable `N`; requires `Y` irreducible.
pub fn discrete_stable_space(
    alpha: f64,
    c: f64,
    y: &FiniteMMSpace,
    seed: u64,
) -> Result<FiniteMMSpace> {
    if !factor::is_irreducible(y)? {
        return Err(Error::NotIrreducible(
            "the discrete-stable base space must be irreducible".into(),
        ));
    }
    let n = sample_discrete_stable_count(alpha, c, seed)?;
    if n > u32::MAX as u64 {
        return Err(Error::SizeOverflow {
            required: u128::MAX,
            budget: DEFAULT_SIZE_BUDGET,
        });
    }
    y.boxplus_pow_budget(n as u32, DEFAULT_SIZE_BUDGET)
}

/// Exact Laplace functional of the discrete-stable space:
/// `exp(-c (1 - chi_A(Y))^alpha)`.
pub fn discrete_stable_laplace_exact(
    a: &Semicharacter,
    alpha: f64,
    c: f64,
    y: &FiniteMMSpace,
) -> Result<f64> {
    check_alpha(alpha)?;
    if !c.is_finite() || c < 0.0 {
        return Err(Error::BadSpec(format!(
            "rate {c} must be finite and nonnegative"
        )));
    }
    functionals::check_budget(a, y, CHI_TERM_BUDGET)?;
    let comp = functionals::chi_complement_scaled(a, y, 1.0);
    Ok((-(c * comp.powf(alpha))).exp())
}

// ---------------------------------------------------------------------------
// Empirical Laplace estimates and equality testing
// ---------------------------------------------------------------------------

/// Mean and standard error of `chi_A` over materialized samples.
pub fn empirical_laplace(a: &Semicharacter, samples: &[FiniteMMSpace]) -> Result<LaplaceEstimate> {
    if samples.is_empty() {
        return Err(Error::BadSpec("need at least one sample".into()));
    }
    let values: Vec<f64> = samples
        .par_iter()
        .map(|x| functionals::chi_budget(a, x, CHI_TERM_BUDGET))
        .collect::<Result<Vec<_>>>()?;
    Ok(estimate_from_values(&values))
}

/// Mean and standard error of `chi_A` over formal products, evaluated
/// factorwise (`chi` is multiplicative), so huge products never materialize.
pub fn empirical_laplace_sums(a: &Semicharacter, samples: &[BoxSum]) -> Result<LaplaceEstimate> {
    if samples.is_empty() {
        return Err(Error::BadSpec("need at least one sample".into()));
    }
    let values: Vec<f64> = samples
        .par_iter()
        .map(|sum| -> Result<f64> {
            let mut v = 1.0f64;
            for term in sum.terms() {
                v *= functionals::chi_budget(a, term, CHI_TERM_BUDGET)?;
            }
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(estimate_from_values(&values))
}

/// Per-panel-entry two-sample statistics.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PanelStat {
    pub mean_x: f64,
    pub stderr_x: f64,
    pub mean_y: f64,
    pub stderr_y: f64,
    pub z: f64,
}

/// Outcome of an equality test over a semicharacter panel.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EqualityReport {
    pub z_threshold: f64,
    pub reject: bool,
    pub stats: Vec<PanelStat>,
}

/// Absolute floor on the pooled standard error in the z statistic. Means of
/// values in [0, 1] carry summation roundoff of order 1e-16 even when the
/// sampled law is degenerate, so differences below this floor are noise; any
/// genuine difference divided by the floor is astronomical and rejects at
/// every sane threshold.
const Z_SE_FLOOR: f64 = 1e-14;

/// Two-sample z-tests from precomputed estimates (one pair per panel entry).
/// When both standard errors collapse (degenerate laws), the statistic is
/// ~0 for equal means and astronomical otherwise, thanks to the
/// [`Z_SE_FLOOR`] denominator floor.
pub fn equality_test_from_estimates(
    xs: &[LaplaceEstimate],
    ys: &[LaplaceEstimate],
    z_threshold: f64,
) -> Result<EqualityReport> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::BadSpec(
            "estimate lists must be nonempty and of equal length".into(),
        ));
    }
    if !z_threshold.is_finite() || z_threshold <= 0.0 {
        return Err(Error::BadSpec(format!(
            "z threshold {z_threshold} must be positive"
        )));
    }
    let mut stats = Vec::with_capacity(xs.len());
    let mut reject = false;
    for (ex, ey) in xs.iter().zip(ys) {
        let diff = ex.mean - ey.mean;
        let se = (ex.stderr * ex.stderr + ey.stderr * ey.stderr).sqrt();
        let z = diff / se.max(Z_SE_FLOOR);
        if z.abs() > z_threshold {
            reject = true;
        }
        stats.push(PanelStat {
            mean_x: ex.mean,
            stderr_x: ex.stderr,
            mean_y: ey.mean,
            stderr_y: ey.stderr,
            z,
        });
    }
    Ok(EqualityReport {
        z_threshold,
        reject,
        stats,
    })
}

/// Tests equality in law of two sample sets through a panel of
/// semicharacters: per entry, a two-sample z-statistic on the empirical
/// Laplace values; rejects when any statistic exceeds the threshold.
pub fn equality_test(
    xs: &[FiniteMMSpace],
    ys: &[FiniteMMSpace],
    panel: &[Semicharacter],
    z_threshold: f64,
) -> Result<EqualityReport> {
    if panel.is_empty() {
        return Err(Error::BadSpec("panel must be nonempty".into()));
    }
    let ex: Vec<LaplaceEstimate> = panel
        .iter()
        .map(|a| empirical_laplace(a, xs))
        .collect::<Result<_>>()?;
    let ey: Vec<LaplaceEstimate> = panel
        .iter()
        .map(|a| empirical_laplace(a, ys))
        .collect::<Result<_>>()?;
    equality_test_from_estimates(&ex, &ey, z_threshold)
}

/// [`equality_test`] over formal products.
pub fn equality_test_sums(
    xs: &[BoxSum],
    ys: &[BoxSum],
    panel: &[Semicharacter],
    z_threshold: f64,
) -> Result<EqualityReport> {
    if panel.is_empty() {
        return Err(Error::BadSpec("panel must be nonempty".into()));
    }
    let ex: Vec<LaplaceEstimate> = panel
        .iter()
        .map(|a| empirical_laplace_sums(a, xs))
        .collect::<Result<_>>()?;
    let ey: Vec<LaplaceEstimate> = panel
        .iter()
        .map(|a| empirical_laplace_sums(a, ys))
        .collect::<Result<_>>()?;
    equality_test_from_estimates(&ex, &ey, z_threshold)
}

/// Verifies the defining identity of the stable law: `(a+b)^{1/alpha} Y`
/// equals `a^{1/alpha} Y' boxplus b^{1/alpha} Y''` in distribution. Three
/// independent sample batches share the seed; per-sample chi values of the
/// right side multiply across the two independent batches, so both sides
/// are unbiased for their Laplace functionals. Uses the default z threshold.
pub fn stability_check(
    spec: &StableSpec,
    a_weight: f64,
    b_weight: f64,
    panel: &[Semicharacter],
    nsamples: usize,
    seed: u64,
) -> Result<EqualityReport> {
    if panel.is_empty() {
        return Err(Error::BadSpec("panel must be nonempty".into()));
    }
    for w in [a_weight, b_weight] {
        if !w.is_finite() || w <= 0.0 {
            return Err(Error::BadSpec(format!("weight {w} must be positive")));
        }
    }
    let alpha = spec.alpha();
    let lhs = lepage_chi_matrix(
        spec,
        panel,
        (a_weight + b_weight).powf(1.0 / alpha),
        nsamples,
        seed,
        0,
    )?;
    let rhs_a = lepage_chi_matrix(spec, panel, a_weight.powf(1.0 / alpha), nsamples, seed, 1)?;
    let rhs_b = lepage_chi_matrix(spec, panel, b_weight.powf(1.0 / alpha), nsamples, seed, 2)?;
    let ex: Vec<LaplaceEstimate> = lhs.iter().map(|row| estimate_from_values(row)).collect();
    let ey: Vec<LaplaceEstimate> = rhs_a
        .iter()
        .zip(&rhs_b)
        .map(|(ra, rb)| {
            let prod: Vec<f64> = ra.iter().zip(rb).map(|(x, y)| x * y).collect();
            estimate_from_values(&prod)
        })
        .collect();
    equality_test_from_estimates(&ex, &ey, num::DEFAULT_Z)
}

// ---------------------------------------------------------------------------
// Law-of-large-numbers limit
// ---------------------------------------------------------------------------

/// The limit of `E[chi_A((1/n) boxplus_{k<=n} X_k)]` as `n -> inf` for
/// i.i.d. draws from `dist`: `exp(-coefficient_sum(A) * E[mean pair
/// distance])`. Notably not 1 — averaging does not concentrate, there is no
/// law of large numbers in this semigroup.
pub fn lln_limit_exact(a: &Semicharacter, dist: &DiscreteDistribution) -> f64 {
    (-(a.coefficient_sum() * dist.mean_pair_distance())).exp()
}

/// Empirical counterpart at finite `n`: each outer sample draws `n` atoms
/// plus one point tuple of the rescaled product — coordinatewise, so the
/// `|Z|^n`-point product is never materialized and `n` may be large — and
/// evaluates `exp(-sum a_ij d(x_i, x_j))` on that tuple. This is unbiased
/// for `E[chi_A((1/n) (Z_1 boxplus ... boxplus Z_n))]` and keeps genuine
/// per-sample noise even when `dist` is a point mass.
pub fn lln_empirical(
    a: &Semicharacter,
    dist: &DiscreteDistribution,
    n: u32,
    nsamples: usize,
    seed: u64,
) -> Result<LaplaceEstimate> {
    if n == 0 {
        return Err(Error::BadSpec("averaging order n must be at least 1".into()));
    }
    check_nsamples(nsamples)?;
    let k = a.order();
    let values: Vec<f64> = (0..nsamples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let mut esum = 0.0f64;
            let mut tuple = vec![0usize; k];
            for _ in 0..n {
                let z = dist.sample(&mut rng);
                for slot in tuple.iter_mut() {
                    *slot = z.sample_index(&mut rng);
                }
                for &(p, q, aij) in a.entries() {
                    esum += aij * z.d(tuple[p], tuple[q]);
                }
            }
            (-esum / n as f64).exp()
        })
        .collect();
    Ok(estimate_from_values(&values))
}
