//! Acceptance suite: thirteen end-to-end criteria covering semicharacter
//! algebra, distance computations, factorization, the stochastic laws, and
//! CLI determinism. Each test prints one PASS line (visible with
//! `--nocapture`); a failed assertion is the corresponding FAIL.
//!
//! Every sweep is seeded, so the suite is deterministic. Monte Carlo
//! assertions use the stated standard-error bands with frozen seeds.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::sync::{Mutex, MutexGuard};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use mms::{factor, functionals, prohorov, stochastic, synth};
use mms::{DiscreteDistribution, FiniteMMSpace, LevyMeasure, Semicharacter, StableSpec};

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

fn two_point(p: f64, d: f64) -> FiniteMMSpace {
    FiniteMMSpace::two_point(p, d).expect("valid two-point space")
}

/// A random probability vector without the full-support floor, for measure-
/// level Prohorov tests (entries may be arbitrarily small).
fn random_measure(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>().max(1e-12)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

/// Sum-metric distance matrix of the product of two point sets, index
/// (i, j) -> i * ny + j.
fn product_dist(dx: &[Vec<f64>], dy: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (nx, ny) = (dx.len(), dy.len());
    let mut rows = vec![vec![0.0; nx * ny]; nx * ny];
    for i1 in 0..nx {
        for j1 in 0..ny {
            for i2 in 0..nx {
                for j2 in 0..ny {
                    rows[i1 * ny + j1][i2 * ny + j2] = dx[i1][i2] + dy[j1][j2];
                }
            }
        }
    }
    rows
}

/// Product measure, same indexing.
fn product_measure(mu: &[f64], nu: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(mu.len() * nu.len());
    for &a in mu {
        for &b in nu {
            out.push(a * b);
        }
    }
    out
}

fn pass(line: &str) {
    println!("{line}: PASS");
}

/// The criteria share the process-wide rayon pool and several carry
/// wall-clock caps, so they run one at a time regardless of the harness
/// thread count. Every test takes this lock first.
fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

/// Structural equality of factorizations: same factor sequence in canonical
/// order, matched by isomorphism and multiplicity. (Byte-level comparison is
/// too strict: fiber weights recovered from a product differ from the
/// original factor's weights by an ulp.)
fn same_factorization(a: &factor::Factorization, b: &factor::Factorization) -> bool {
    a.distinct_factors() == b.distinct_factors()
        && a.iter()
            .zip(b.iter())
            .all(|((sa, ma), (sb, mb))| ma == mb && sa.is_isomorphic(sb))
}

// ---------------------------------------------------------------------------
// 1. Semicharacter multiplicativity
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_semicharacter_multiplicativity() {
    let _guard = serial();
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..1000 {
        let x = synth::random_space(&mut rng, 6);
        let y = synth::random_space(&mut rng, 6);
        let order = 2 + (rng.gen::<u64>() % 2) as usize;
        let a = synth::random_semicharacter(&mut rng, order);
        let product = x.boxplus(&y).expect("36-point products fit the budget");
        let lhs = functionals::chi(&a, &product).unwrap();
        let rhs = functionals::chi(&a, &x).unwrap() * functionals::chi(&a, &y).unwrap();
        assert!(
            (lhs - rhs).abs() <= 1e-10,
            "multiplicativity violated: |{lhs} - {rhs}| > 1e-10"
        );
    }
    let dt = t0.elapsed().as_secs_f64();
    assert!(dt < 10.0, "runtime {dt:.2}s exceeds the 10s cap");
    pass(&format!(
        "criterion 01 semicharacter multiplicativity (1000 pairs, <=1e-10, {dt:.2}s)"
    ));
}

// ---------------------------------------------------------------------------
// 2. Diameter additivity and scale homogeneity
// ---------------------------------------------------------------------------

#[test]
fn criterion_02_diam_additivity_and_scale_homogeneity() {
    let _guard = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for _ in 0..1000 {
        let x = synth::random_space(&mut rng, 6);
        let y = synth::random_space(&mut rng, 6);
        let product = x.boxplus(&y).unwrap();
        assert!(
            (product.diam() - (x.diam() + y.diam())).abs() <= 1e-12,
            "diameter additivity violated"
        );
        let a = 0.2 + 4.8 * rng.gen::<f64>();
        let scaled = x.scale(a).unwrap();
        assert!(
            (scaled.diam() - a * x.diam()).abs() <= 1e-12,
            "scale homogeneity violated"
        );
    }
    pass("criterion 02 diameter additivity + scale homogeneity (1000 pairs, <=1e-12)");
}

// ---------------------------------------------------------------------------
// 3. Sandwich between Delta and the distance to the one-point space
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_sandwich() {
    let _guard = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for _ in 0..1000 {
        let x = synth::random_space(&mut rng, 8);
        let d0 = prohorov::dgpr_to_trivial(&x);
        let delta = functionals::delta(&x);
        assert!(
            delta / 4.0 <= d0 + 1e-12,
            "lower sandwich violated: {delta}/4 > {d0}"
        );
        assert!(
            d0 <= delta.sqrt() + 1e-12,
            "upper sandwich violated: {d0} > sqrt({delta})"
        );
    }
    pass("criterion 03 sandwich delta/4 <= dgpr0 <= sqrt(delta) (1000 spaces, 0 violations)");
}

// ---------------------------------------------------------------------------
// 4. Kappa chain
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_kappa_chain() {
    let _guard = serial();
    // The chain constants: (1 - 1/e)/2 and 1/(1 - 1/e).
    let kappa_lo = (1.0 - (-1.0f64).exp()) / 2.0;
    let kappa_hi = 1.0 / (1.0 - (-1.0f64).exp());
    assert!((kappa_lo - 0.31606).abs() < 1e-5);
    assert!((kappa_hi - 1.58198).abs() < 1e-5);

    let mut rng = ChaCha8Rng::seed_from_u64(104);
    for _ in 0..1000 {
        let x = synth::random_space(&mut rng, 8);
        let report = functionals::check_kappa_chain(&x).unwrap();
        assert!(
            report.pass,
            "kappa chain violated: {} <= {} <= {} fails",
            report.lower, report.delta, report.upper
        );
        let cap = functionals::big_d(&x).unwrap().min(1.0);
        assert!((report.lower - kappa_lo * cap).abs() <= 1e-12);
        assert!((report.upper - kappa_hi * cap).abs() <= 1e-12);
    }
    pass("criterion 04 kappa chain 0.31606/1.58198 (1000 spaces, 0 violations)");
}

// ---------------------------------------------------------------------------
// 5. Prohorov distance: oracle agreement, translation invariance,
//    product subadditivity
// ---------------------------------------------------------------------------

#[test]
fn criterion_05_prohorov_oracle_translation_subadditivity() {
    let _guard = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(105);

    // Flow solver vs the brute-force oracle on 200 random instances.
    for _ in 0..200 {
        let n = 2 + (rng.gen::<u64>() % 7) as usize;
        let scale = 0.5 + rng.gen::<f64>();
        let space = synth::band_space(&mut rng, n, scale);
        let dist = space.dist_rows();
        let mu1 = random_measure(&mut rng, n);
        let mu2 = random_measure(&mut rng, n);
        let fast = prohorov::prohorov(&mu1, &mu2, &dist).unwrap();
        let oracle = prohorov::prohorov_oracle(&mu1, &mu2, &dist).unwrap();
        assert!(
            (fast - oracle).abs() <= 1e-12,
            "solver {fast} vs oracle {oracle}"
        );
    }

    // Translation invariance and subadditivity on 200 product instances.
    for _ in 0..200 {
        let nx = 2 + (rng.gen::<u64>() % 3) as usize;
        let ny = 2 + (rng.gen::<u64>() % 3) as usize;
        let sx = synth::band_space(&mut rng, nx, 1.0);
        let sy = synth::band_space(&mut rng, ny, 0.7);
        let (dx, dy) = (sx.dist_rows(), sy.dist_rows());
        let dprod = product_dist(&dx, &dy);
        let mu1 = random_measure(&mut rng, nx);
        let mu2 = random_measure(&mut rng, nx);
        let nu = random_measure(&mut rng, ny);

        // Tensoring both measures with the same factor leaves the distance
        // unchanged, exactly.
        let lifted = prohorov::prohorov(
            &product_measure(&mu1, &nu),
            &product_measure(&mu2, &nu),
            &dprod,
        )
        .unwrap();
        let base = prohorov::prohorov(&mu1, &mu2, &dx).unwrap();
        assert!(
            (lifted - base).abs() <= 1e-12,
            "translation invariance violated: {lifted} vs {base}"
        );

        // Product subadditivity with independent second coordinates.
        let nu2 = random_measure(&mut rng, ny);
        let joint = prohorov::prohorov(
            &product_measure(&mu1, &nu),
            &product_measure(&mu2, &nu2),
            &dprod,
        )
        .unwrap();
        let second = prohorov::prohorov(&nu, &nu2, &dy).unwrap();
        assert!(
            joint <= base + second + 1e-12,
            "subadditivity violated: {joint} > {base} + {second}"
        );
    }
    pass("criterion 05 prohorov oracle agreement + translation invariance + subadditivity (200+200 instances)");
}

// ---------------------------------------------------------------------------
// 6. Certified Gromov-Prohorov upper bounds on products
// ---------------------------------------------------------------------------

/// The anchored distance-to-one-point value of `Y` upper-bounds the true
/// distance between `X boxplus Y` and `X`, and the searched bound must stay
/// within 5% of it from below. (Unanchored placements can genuinely beat the
/// anchored value, so the comparison is one-sided; every certificate is
/// independently re-verified.)
#[test]
fn criterion_06_dgpr_upper_certified_on_products() {
    let _guard = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    for i in 0..100 {
        let x = synth::random_space(&mut rng, 5);
        let y = synth::random_space(&mut rng, 5);
        let product = x.boxplus(&y).unwrap();
        let (eps, cert) = prohorov::dgpr_upper(&product, &x, 400, 6000 + i);
        prohorov::verify_certificate(&product, &x, &cert)
            .expect("returned certificate re-verifies");
        assert!((eps - cert.epsilon).abs() == 0.0);
        let oracle = prohorov::dgpr_to_trivial(&y);
        assert!(
            eps <= 1.05 * oracle + 1e-12,
            "upper bound {eps} exceeds 1.05 * {oracle}"
        );
    }
    pass("criterion 06 dgpr_upper within 5% of the anchored oracle from below, certificates re-verified (100 pairs)");
}

// ---------------------------------------------------------------------------
// 7. Prime factorization
// ---------------------------------------------------------------------------

#[test]
fn criterion_07_factorization() {
    let _guard = serial();
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(107);

    // Round trip, disjoint-union additivity, label-shuffle invariance.
    for _ in 0..500 {
        let ny = 2 + (rng.gen::<u64>() % 3) as usize; // 2..=4
        let nz = 2 + (rng.gen::<u64>() % 5) as usize; // 2..=6, product <= 24
        let y = synth::band_space(&mut rng, ny, 1.0);
        let z = synth::band_space(&mut rng, nz, 0.6);
        let x = y.boxplus(&z).unwrap();

        let f = factor::factorize(&x).unwrap();
        let back = factor::sigma(&f).unwrap();
        assert!(back.is_isomorphic(&x), "sigma . psi is not the identity");

        let union = factor::factorize(&y)
            .unwrap()
            .union(&factor::factorize(&z).unwrap());
        assert!(
            same_factorization(&f, &union),
            "factorize(X boxplus Y) != factorize(X) + factorize(Y)"
        );

        let mut perm: Vec<usize> = (0..x.n()).collect();
        perm.shuffle(&mut rng);
        let shuffled = x.permuted(&perm);
        assert!(
            same_factorization(&factor::factorize(&shuffled).unwrap(), &f),
            "factorization is not label-shuffle invariant"
        );
    }

    // Primality of irreducible divisors.
    for _ in 0..200 {
        let (x, y, z) = synth::random_product(&mut rng, 4);
        let f = factor::factorize(&x).unwrap();
        let factors: Vec<_> = f.iter().collect();
        let (q, _) = factors[(rng.gen::<u64>() as usize) % factors.len()];
        assert!(factor::divides(q, &x).unwrap());
        assert!(
            factor::divides(q, &y).unwrap() || factor::divides(q, &z).unwrap(),
            "an irreducible divisor of a product divides neither factor"
        );
    }

    // Square roots exist for squares and fail at odd multiplicities.
    for _ in 0..20 {
        let x = synth::random_space(&mut rng, 4);
        let square = x.boxplus_pow(2).unwrap();
        let root = factor::nth_root(&square, 2)
            .unwrap()
            .expect("squares have square roots");
        assert!(root.is_isomorphic(&x));

        let w = synth::band_space(&mut rng, 2, 3.0);
        let odd = square.boxplus(&w).unwrap();
        assert!(
            factor::nth_root(&odd, 2).unwrap().is_none(),
            "odd multiplicity must not have a square root"
        );
    }

    let dt = t0.elapsed().as_secs_f64();
    assert!(dt < 60.0, "runtime {dt:.2}s exceeds the 60s cap");
    pass(&format!(
        "criterion 07 factorization round-trip/additivity/shuffle/primality/roots (500+200+20 instances, {dt:.2}s)"
    ));
}

// ---------------------------------------------------------------------------
// 8. Scaling rigidity
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_scaling_rigidity() {
    let _guard = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let mut done = 0;
    while done < 200 {
        let x = synth::random_space(&mut rng, 5);
        if x.is_trivial() {
            continue;
        }
        let a = 0.2 + 4.8 * rng.gen::<f64>();
        let b = 0.2 + 4.8 * rng.gen::<f64>();
        let c = 0.2 + 4.8 * rng.gen::<f64>();
        let lhs = x
            .scale(a)
            .unwrap()
            .boxplus(&x.scale(b).unwrap())
            .unwrap();
        let rhs = x.scale(c).unwrap();
        assert!(
            !lhs.is_isomorphic(&rhs),
            "scaling rigidity violated at a={a}, b={b}, c={c}"
        );
        done += 1;
    }
    pass("criterion 08 scaling rigidity (200 instances, 0 isomorphisms)");
}

// ---------------------------------------------------------------------------
// 9. Infinitely divisible law
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_levy_law() {
    let _guard = serial();
    let t0 = Instant::now();
    let nu = LevyMeasure::new(vec![(two_point(0.5, 1.0), 2.0)]).unwrap();
    let a = Semicharacter::standard();

    let exact = stochastic::levy_laplace_exact(&a, &nu, 1.0).unwrap();
    assert!(
        (exact - 0.531_464).abs() < 1e-6,
        "exact Laplace value {exact} drifted from 0.531464"
    );

    let sums = (0..100_000u64)
        .map(|i| stochastic::sample_levy_terms(&nu, 1.0, 900_000 + i))
        .collect::<mms::Result<Vec<_>>>()
        .unwrap();
    let est = stochastic::empirical_laplace_sums(&a, &sums).unwrap();
    assert!(
        (est.mean - exact).abs() <= 3.0 * est.stderr,
        "empirical mean {} not within 3 s.e. ({}) of {exact}",
        est.mean,
        est.stderr
    );

    let dt = t0.elapsed().as_secs_f64();
    assert!(dt < 30.0, "runtime {dt:.2}s exceeds the 30s cap");
    pass(&format!(
        "criterion 09 levy law: exact 0.531464, empirical within 3 s.e. at 1e5 samples ({dt:.2}s)"
    ));
}

// ---------------------------------------------------------------------------
// 10. Stable law
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_stable_law() {
    let _guard = serial();
    let base = DiscreteDistribution::new(vec![(two_point(0.5, 1.0), 1.0)]).unwrap();
    let spec = StableSpec::new(0.5, base.clone(), 1e-3).unwrap();
    let a = Semicharacter::standard();

    // Quadrature oracle against the closed form exp(-0.5 sqrt(pi)).
    let quad = stochastic::stable_laplace_quadrature(&a, 0.5, &base).unwrap();
    let closed = (-0.5 * std::f64::consts::PI.sqrt()).exp();
    assert!(
        (quad - closed).abs() < 1e-6,
        "quadrature {quad} vs closed form {closed}"
    );

    // Monte Carlo within 4 s.e. of the oracle; the six-digit reading
    // 0.412180 sits inside the same band.
    let est = stochastic::lepage_laplace_empirical(&spec, std::slice::from_ref(&a), 1.0, 10_000, 31)
        .unwrap()
        .remove(0);
    assert!(
        (est.mean - quad).abs() <= 4.0 * est.stderr,
        "empirical {} not within 4 s.e. ({}) of {quad}",
        est.mean,
        est.stderr
    );
    assert!((est.mean - 0.412_180).abs() <= 4.0 * est.stderr);

    // The defining stability identity is accepted...
    let report =
        stochastic::stability_check(&spec, 1.0, 1.0, std::slice::from_ref(&a), 10_000, 32)
            .unwrap();
    assert!(!report.reject, "stability_check rejected its own law");

    // ...and a cross-alpha comparison is rejected.
    let spec7 = StableSpec::new(0.7, base, 0.05).unwrap();
    let e5 = stochastic::lepage_laplace_empirical(&spec, std::slice::from_ref(&a), 1.0, 4000, 33)
        .unwrap();
    let e7 = stochastic::lepage_laplace_empirical(&spec7, std::slice::from_ref(&a), 1.0, 4000, 34)
        .unwrap();
    let cross = stochastic::equality_test_from_estimates(&e5, &e7, 4.0).unwrap();
    assert!(cross.reject, "cross-alpha laws were not distinguished");

    pass("criterion 10 stable law: quadrature = exp(-0.5 sqrt(pi)), empirical within 4 s.e., stability accepted, cross-alpha rejected");
}

// ---------------------------------------------------------------------------
// 11. Thinning
// ---------------------------------------------------------------------------

#[test]
fn criterion_11_thinning() {
    let _guard = serial();
    let x = two_point(0.5, 1.0).boxplus_pow(2).unwrap();
    let a = Semicharacter::standard();

    let exact = stochastic::thinning_laplace_exact(&a, &x, 0.5).unwrap();
    assert!(
        (exact - 0.708_913).abs() < 1e-6,
        "exact thinning value {exact} drifted from 0.708913"
    );

    let drawn = (0..20_000u64)
        .map(|i| stochastic::thin(&x, 0.5, 1_100_000 + i))
        .collect::<mms::Result<Vec<_>>>()
        .unwrap();
    let est = stochastic::empirical_laplace(&a, &drawn).unwrap();
    assert!(
        (est.mean - exact).abs() <= 3.0 * est.stderr,
        "thinning Monte Carlo {} not within 3 s.e. ({}) of {exact}",
        est.mean,
        est.stderr
    );

    // Two-stage thinning p then q equals one-stage pq in law.
    let (p, q) = (0.6, 0.5);
    let two_stage = (0..20_000u64)
        .map(|i| {
            let first = stochastic::thin(&x, p, 1_200_000 + i)?;
            stochastic::thin(&first, q, 1_300_000 + i)
        })
        .collect::<mms::Result<Vec<_>>>()
        .unwrap();
    let one_stage = (0..20_000u64)
        .map(|i| stochastic::thin(&x, p * q, 1_400_000 + i))
        .collect::<mms::Result<Vec<_>>>()
        .unwrap();
    let report =
        stochastic::equality_test(&two_stage, &one_stage, std::slice::from_ref(&a), 4.0).unwrap();
    assert!(!report.reject, "two-stage thinning rejected against pq");

    pass("criterion 11 thinning: exact 0.708913, Monte Carlo within 3 s.e., two-stage = one-stage accepted");
}

// ---------------------------------------------------------------------------
// 12. No law of large numbers
// ---------------------------------------------------------------------------

#[test]
fn criterion_12_no_lln_limit() {
    let _guard = serial();
    let t0 = Instant::now();
    let dist = DiscreteDistribution::new(vec![(two_point(0.5, 1.0), 1.0)]).unwrap();
    let a = Semicharacter::standard();

    let limit = stochastic::lln_limit_exact(&a, &dist);
    assert!(
        (limit - 0.606_531).abs() < 1e-6,
        "exact limit {limit} drifted from exp(-0.5)"
    );

    let est = stochastic::lln_empirical(&a, &dist, 512, 1000, 1200).unwrap();
    assert!(
        (est.mean - limit).abs() <= 3.0 * est.stderr,
        "empirical value {} not within 3 s.e. ({}) of {limit}",
        est.mean,
        est.stderr
    );

    let dt = t0.elapsed().as_secs_f64();
    assert!(dt < 60.0, "runtime {dt:.2}s exceeds the 60s cap");
    pass(&format!(
        "criterion 12 no-LLN limit: n=512 average within 3 s.e. of exp(-0.5) ({dt:.2}s)"
    ));
}

// ---------------------------------------------------------------------------
// 13. CLI determinism
// ---------------------------------------------------------------------------

fn run_with_threads(dir: &Path, threads: &str, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mms"))
        .current_dir(dir)
        .env("RAYON_NUM_THREADS", threads)
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn criterion_13_cli_determinism() {
    let _guard = serial();
    let dir = TempDir::new().unwrap();
    let write = |name: &str, body: &str| fs::write(dir.path().join(name), body).unwrap();
    write(
        "t.json",
        r#"{"n":2,"dist":[[0.0,1.0],[1.0,0.0]],"weights":[0.5,0.5]}"#,
    );
    write("a.json", r#"{"n":2,"a":[[1,2,1.0]]}"#);
    write(
        "levy.json",
        r#"{"atoms":[{"space":{"n":2,"dist":[[0.0,1.0],[1.0,0.0]],"weights":[0.5,0.5]},"mass":2.0}]}"#,
    );
    write(
        "stable.json",
        r#"{"alpha":0.5,"base":{"atoms":[{"space":{"n":2,"dist":[[0.0,1.0],[1.0,0.0]],"weights":[0.5,0.5]},"p":1.0}]},"tail_tol":0.001}"#,
    );
    write(
        "stable_coarse.json",
        r#"{"alpha":0.5,"base":{"atoms":[{"space":{"n":2,"dist":[[0.0,1.0],[1.0,0.0]],"weights":[0.5,0.5]},"p":1.0}]},"tail_tol":0.5}"#,
    );
    write(
        "dist.json",
        r#"{"atoms":[{"space":{"n":2,"dist":[[0.0,1.0],[1.0,0.0]],"weights":[0.5,0.5]},"p":1.0}]}"#,
    );
    write(
        "panel.json",
        r#"{"panel":[{"n":2,"a":[[1,2,1.0]]}],"z":4.0}"#,
    );

    // Build the product fixture through the CLI itself.
    let prod = run_with_threads(dir.path(), "2", &["boxplus", "t.json", "t.json"]);
    assert!(prod.status.success());
    fs::write(dir.path().join("prod.json"), &prod.stdout).unwrap();

    let stochastic_invocations: Vec<Vec<&str>> = vec![
        vec!["chi", "prod.json", "a.json", "--samples", "500", "--seed", "7"],
        vec!["dgpr-upper", "prod.json", "t.json", "--budget", "100", "--seed", "7"],
        vec!["sample-levy", "levy.json", "1.0", "--samples", "40", "--seed", "7"],
        vec!["sample-levy", "levy.json", "1.0", "a.json", "--samples", "300", "--seed", "7"],
        vec!["sample-lepage", "stable_coarse.json", "--samples", "20", "--seed", "7"],
        vec!["sample-lepage", "stable.json", "a.json", "--samples", "300", "--seed", "7"],
        vec!["thin", "prod.json", "0.5", "--samples", "50", "--seed", "7"],
        vec!["thin", "prod.json", "0.5", "a.json", "--samples", "300", "--seed", "7"],
        vec!["discrete-stable", "t.json", "0.6", "1.0", "--seed", "7"],
        vec!["test-stable", "stable.json", "1.0", "1.0", "panel.json", "--samples", "300", "--seed", "7"],
        vec!["lln-demo", "dist.json", "a.json", "64", "--samples", "300", "--seed", "7"],
    ];

    for args in &stochastic_invocations {
        let mut outputs = Vec::new();
        for threads in ["1", "4"] {
            for _ in 0..2 {
                outputs.push(run_with_threads(dir.path(), threads, args));
            }
        }
        let first = &outputs[0];
        assert!(
            first.status.code().is_some(),
            "no exit code for {args:?}"
        );
        for other in &outputs[1..] {
            assert_eq!(
                first.stdout, other.stdout,
                "output of {args:?} varies across runs/worker counts"
            );
            assert_eq!(first.status.code(), other.status.code());
        }
        // A different seed must actually change stochastic output.
        let mut reseeded: Vec<String> = args
            .iter()
            .map(|s| if *s == "7" { "8".to_string() } else { s.to_string() })
            .collect();
        let reseeded_refs: Vec<&str> = reseeded.iter_mut().map(|s| s.as_str()).collect();
        let other_seed = run_with_threads(dir.path(), "2", &reseeded_refs);
        if args[0] != "dgpr-upper" && args[0] != "test-stable" {
            // Those two can land on identical reports for nearby seeds; all
            // sampler outputs must differ.
            assert_ne!(
                first.stdout, other_seed.stdout,
                "{args:?} ignored its seed"
            );
        }
    }
    pass("criterion 13 CLI determinism: byte-identical across repeat runs and worker counts 1/4 for every stochastic verb");
}
