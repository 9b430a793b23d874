//! `mms` — deterministic command-line front end for the `mms` library.
//!
//! Every verb reads JSON documents from file paths, runs exactly one library
//! operation family, and writes a single JSON line to `--out` (default `-`,
//! standard output). Exit codes: 0 success, 1 validation/parse error,
//! 2 budget exceeded, 3 statistical rejection (`test-*` verbs only). Errors
//! are reported as `{"error": <code>, "message": <text>}` on standard output.
//!
//! Same command + same seed produces byte-identical output, independent of
//! the worker count (`RAYON_NUM_THREADS`).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use serde_json::value::RawValue;

use mms::json::{
    certificate_to_json, factorization_to_json, parse_distribution, parse_levy, parse_panel,
    parse_prohorov_input, parse_samples, parse_semicharacter, parse_space, parse_stable,
    samples_to_json, space_to_json,
};
use mms::num::{DEFAULT_Z, PROHOROV_ORACLE_MAX};
use mms::{factor, functionals, prohorov, stochastic};
use mms::{Error, FiniteMMSpace, Result, Semicharacter};

#[derive(Parser)]
#[command(
    name = "mms",
    version,
    about = "Finite metric measure spaces under the box-plus product",
    long_about = "Operations on finite metric measure spaces: the box-plus product, \
semicharacter functionals, Prohorov/Gromov-Prohorov distances, prime factorization, \
and samplers for infinitely divisible, stable, and thinned random spaces.\n\n\
All inputs and outputs are JSON. A space document is \
{\"n\": int, \"dist\": [[...]], \"weights\": [...]}; a semicharacter document is \
{\"n\": int, \"a\": [[i, j, coeff], ...]} with 1-based indices i < j <= n."
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,

    /// RNG seed for stochastic verbs.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Monte Carlo sample count for estimates and sampler batches.
    #[arg(long, global = true, default_value_t = 10_000)]
    samples: u64,

    /// Numeric tolerance knob; used as the stable-law tail tolerance when the
    /// stable spec document omits "tail_tol".
    #[arg(long, global = true, default_value_t = 1e-3)]
    tol: f64,

    /// Size/search budget: point cap for materialized products, restart count
    /// for the Gromov-Prohorov upper-bound search.
    #[arg(long, global = true, default_value_t = 4096)]
    budget: u64,

    /// Output path; "-" writes to standard output.
    #[arg(long, global = true, default_value = "-")]
    out: String,
}

#[derive(Subcommand)]
enum Verb {
    /// Validate a space document; echo its size and canonical serialization.
    Validate { space: PathBuf },
    /// Box-plus product of two spaces.
    Boxplus { x: PathBuf, y: PathBuf },
    /// K-fold box-plus power of a space.
    Pow { x: PathBuf, k: u32 },
    /// Rescale all distances by a positive factor.
    Scale { x: PathBuf, a: f64 },
    /// Diameter of a space.
    Diam { x: PathBuf },
    /// Test two spaces for measure-preserving isometry; also emits canonical keys.
    Iso { x: PathBuf, y: PathBuf },
    /// Semicharacter value chi_A(X): exact, a Monte Carlo estimate, and one
    /// sampled tuple distance matrix (the matrix view of the estimator).
    Chi { x: PathBuf, spec: PathBuf },
    /// Functional bundle: chi1, Delta, D, and the kappa chain; with a
    /// semicharacter: also D_A and the chi1-exponent bounds.
    Functionals {
        x: PathBuf,
        spec: Option<PathBuf>,
    },
    /// Prohorov distance between two measures on a common finite metric
    /// space; input {"mu1": [...], "mu2": [...], "dist": [[...]]}. Emits the
    /// brute-force oracle value too when the space is small enough.
    Prohorov { input: PathBuf },
    /// Anchored Gromov-Prohorov distance to the one-point space.
    Dgpr0 { x: PathBuf },
    /// Certified Gromov-Prohorov upper bound between two spaces, plus the
    /// heuristic lower reference value. The certificate is re-verified
    /// before it is emitted.
    DgprUpper { x: PathBuf, y: PathBuf },
    /// Prime factorization over the box-plus semigroup.
    Factorize { x: PathBuf },
    /// Does Y divide X in the box-plus semigroup?
    Divides { y: PathBuf, x: PathBuf },
    /// Quotient space X / Y (errors when Y does not divide X).
    Quotient { x: PathBuf, y: PathBuf },
    /// Greatest common divisor of two spaces.
    Meet { x: PathBuf, y: PathBuf },
    /// Least common multiple of two spaces.
    Join { x: PathBuf, y: PathBuf },
    /// K-th box-plus root (errors when none exists).
    Root { x: PathBuf, k: u32 },
    /// Sample the infinitely divisible law of a finite Levy measure at time
    /// T. With a semicharacter: exact Laplace value and a Monte Carlo
    /// estimate; without: the sampled spaces themselves.
    SampleLevy {
        levy: PathBuf,
        t: f64,
        spec: Option<PathBuf>,
    },
    /// Sample the alpha-stable law of a stable spec document
    /// {"alpha": ..., "base": ..., "tail_tol": ...}. With a semicharacter:
    /// quadrature value and a Monte Carlo estimate; without: the sampled
    /// spaces themselves.
    SampleLepage {
        stable: PathBuf,
        spec: Option<PathBuf>,
    },
    /// Thin a space with retention probability P. With a semicharacter:
    /// exact Laplace value and a Monte Carlo estimate; without: the sampled
    /// spaces themselves.
    Thin {
        x: PathBuf,
        p: f64,
        spec: Option<PathBuf>,
    },
    /// One draw of the discrete-stable space BASE^{boxplus N} with
    /// N ~ discrete-stable(alpha, c); BASE must be irreducible.
    DiscreteStable { base: PathBuf, alpha: f64, c: f64 },
    /// Two-sample equality-in-law test over a semicharacter panel
    /// {"panel": [...], "z": ...}; exits 3 on rejection.
    TestEqual {
        xs: PathBuf,
        ys: PathBuf,
        panel: PathBuf,
    },
    /// Verify the stable-law identity (a+b)^{1/alpha} Y = a^{1/alpha} Y'
    /// boxplus b^{1/alpha} Y'' in law over a panel; exits 3 on rejection.
    TestStable {
        stable: PathBuf,
        a: f64,
        b: f64,
        panel: PathBuf,
    },
    /// No-law-of-large-numbers demo: exact limit of E[chi_A((1/n) boxplus)]
    /// under i.i.d. draws from a discrete distribution document, plus the
    /// empirical value at finite N.
    LlnDemo {
        dist: PathBuf,
        spec: PathBuf,
        n: u32,
    },
}

/// Bodies that embed a library-emitted document byte-for-byte.
#[derive(serde::Serialize)]
struct ValidateBody {
    valid: bool,
    n: usize,
    space: Box<RawValue>,
}

#[derive(serde::Serialize)]
struct DgprUpperBody {
    upper: f64,
    lower: f64,
    certificate: Box<RawValue>,
}

#[derive(serde::Serialize)]
struct DiscreteStableBody {
    count: u64,
    space: Box<RawValue>,
}

fn to_body<T: serde::Serialize>(value: &T) -> Result<String> {
    serde_json::to_string(value).map_err(|e| Error::ParseError(format!("serialize body: {e}")))
}

/// A successful verb run: the JSON body and whether a statistical test
/// rejected (exit code 3 instead of 0).
struct Outcome {
    body: String,
    reject: bool,
}

impl Outcome {
    fn ok(body: String) -> Self {
        Outcome {
            body,
            reject: false,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            if let Err(e) = emit(&cli.out, &outcome.body) {
                println!("{}", error_body(&e));
                return ExitCode::from(1);
            }
            if outcome.reject {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            println!("{}", error_body(&e));
            ExitCode::from(if e.is_budget() { 2 } else { 1 })
        }
    }
}

fn error_body(e: &Error) -> String {
    json!({"error": e.code(), "message": e.to_string()}).to_string()
}

fn emit(out: &str, body: &str) -> Result<()> {
    if out == "-" {
        println!("{body}");
        Ok(())
    } else {
        fs::write(out, format!("{body}\n"))
            .map_err(|e| Error::ParseError(format!("cannot write {out}: {e}")))
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::ParseError(format!("cannot read {}: {e}", path.display())))
}

fn load_space(path: &Path) -> Result<FiniteMMSpace> {
    parse_space(&read(path)?)
}

fn load_spec(path: &Path) -> Result<Semicharacter> {
    parse_semicharacter(&read(path)?)
}

/// Wraps a canonical document emitted by the library so it can be nested
/// inside a larger JSON body without changing a single byte of it.
fn nested(doc: String) -> Box<RawValue> {
    RawValue::from_string(doc).expect("library-emitted JSON is always well formed")
}

fn size_budget(cli: &Cli) -> usize {
    usize::try_from(cli.budget).unwrap_or(usize::MAX)
}

fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.verb {
        Verb::Validate { space } => {
            let x = load_space(space)?;
            let body = ValidateBody {
                valid: true,
                n: x.n(),
                space: nested(space_to_json(&x)),
            };
            Ok(Outcome::ok(to_body(&body)?))
        }
        Verb::Boxplus { x, y } => {
            let x = load_space(x)?;
            let y = load_space(y)?;
            let z = x.boxplus_budget(&y, size_budget(cli))?;
            Ok(Outcome::ok(space_to_json(&z)))
        }
        Verb::Pow { x, k } => {
            let x = load_space(x)?;
            let z = x.boxplus_pow_budget(*k, size_budget(cli))?;
            Ok(Outcome::ok(space_to_json(&z)))
        }
        Verb::Scale { x, a } => {
            let x = load_space(x)?;
            Ok(Outcome::ok(space_to_json(&x.scale(*a)?)))
        }
        Verb::Diam { x } => {
            let x = load_space(x)?;
            Ok(Outcome::ok(json!({"diam": x.diam()}).to_string()))
        }
        Verb::Iso { x, y } => {
            let x = load_space(x)?;
            let y = load_space(y)?;
            let body = json!({
                "isomorphic": x.is_isomorphic(&y),
                "key_x": x.canonical_key().hex(),
                "key_y": y.canonical_key().hex(),
            });
            Ok(Outcome::ok(body.to_string()))
        }
        Verb::Chi { x, spec } => {
            let x = load_space(x)?;
            let a = load_spec(spec)?;
            let exact = functionals::chi(&a, &x)?;
            let estimate = functionals::chi_monte_carlo(&a, &x, cli.samples, cli.seed)?;
            let tuple = x.sample_distance_matrix(a.order().max(1), cli.seed);
            let body = json!({
                "chi": exact,
                "estimate": estimate,
                "sample": tuple,
            });
            Ok(Outcome::ok(body.to_string()))
        }
        Verb::Functionals { x, spec } => {
            let x = load_space(x)?;
            let mut body = json!({
                "chi1": functionals::chi1(&x)?,
                "delta": functionals::delta(&x),
                "big_d": functionals::big_d(&x)?,
                "kappa_chain": functionals::check_kappa_chain(&x)?,
            });
            if let Some(path) = spec {
                let a = load_spec(path)?;
                let (hi, lo) = functionals::chi_exponent_bounds(&a)?;
                body["big_d_a"] = json!(functionals::big_d_a(&a, &x)?);
                body["exponents"] = json!({"hi": hi, "lo": lo});
            }
            Ok(Outcome::ok(body.to_string()))
        }
        Verb::Prohorov { input } => {
            let (mu1, mu2, dist) = parse_prohorov_input(&read(input)?)?;
            let value = prohorov::prohorov(&mu1, &mu2, &dist)?;
            let mut body = json!({"prohorov": value});
            if mu1.len() <= PROHOROV_ORACLE_MAX {
                body["oracle"] = json!(prohorov::prohorov_oracle(&mu1, &mu2, &dist)?);
            }
            Ok(Outcome::ok(body.to_string()))
        }
        Verb::Dgpr0 { x } => {
            let x = load_space(x)?;
            Ok(Outcome::ok(
                json!({"dgpr0": prohorov::dgpr_to_trivial(&x)}).to_string(),
            ))
        }
        Verb::DgprUpper { x, y } => {
            let x = load_space(x)?;
            let y = load_space(y)?;
            let restarts = cli.budget.min(u32::MAX as u64) as u32;
            let (upper, cert) = prohorov::dgpr_upper(&x, &y, restarts, cli.seed);
            prohorov::verify_certificate(&x, &y, &cert)?;
            let body = DgprUpperBody {
                upper,
                lower: prohorov::dgpr_lower(&x, &y),
                certificate: nested(certificate_to_json(&cert)),
            };
            Ok(Outcome::ok(to_body(&body)?))
        }
        Verb::Factorize { x } => {
            let x = load_space(x)?;
            let f = factor::psi(&x)?;
            let back = factor::sigma_budget(&f, size_budget(cli).max(x.n()))?;
            if !back.is_isomorphic(&x) {
                return Err(Error::BadSpec(
                    "internal: reassembled factorization is not isomorphic to the input".into(),
                ));
            }
            let single = f.distinct_factors() == 1
                && f.iter().next().is_some_and(|(_, mult)| mult == 1);
            if factor::is_irreducible(&x)? != (single && !x.is_trivial()) {
                return Err(Error::BadSpec(
                    "internal: irreducibility test disagrees with the factorization".into(),
                ));
            }
            Ok(Outcome::ok(factorization_to_json(&f)))
        }
        Verb::Divides { y, x } => {
            let y = load_space(y)?;
            let x = load_space(x)?;
            Ok(Outcome::ok(
                json!({"divides": factor::divides(&y, &x)?}).to_string(),
            ))
        }
        Verb::Quotient { x, y } => {
            let x = load_space(x)?;
            let y = load_space(y)?;
            Ok(Outcome::ok(space_to_json(&factor::quotient(&x, &y)?)))
        }
        Verb::Meet { x, y } => {
            let x = load_space(x)?;
            let y = load_space(y)?;
            Ok(Outcome::ok(space_to_json(&factor::meet(&x, &y)?)))
        }
        Verb::Join { x, y } => {
            let x = load_space(x)?;
            let y = load_space(y)?;
            Ok(Outcome::ok(space_to_json(&factor::join(&x, &y)?)))
        }
        Verb::Root { x, k } => {
            let x = load_space(x)?;
            match factor::nth_root(&x, *k)? {
                Some(r) => Ok(Outcome::ok(space_to_json(&r))),
                None => Err(Error::NotDivisible),
            }
        }
        Verb::SampleLevy { levy, t, spec } => {
            let nu = parse_levy(&read(levy)?)?;
            match spec {
                Some(path) => {
                    let a = load_spec(path)?;
                    let exact = stochastic::levy_laplace_exact(&a, &nu, *t)?;
                    let sums = (0..cli.samples)
                        .map(|i| stochastic::sample_levy_terms(&nu, *t, cli.seed.wrapping_add(i)))
                        .collect::<Result<Vec<_>>>()?;
                    let estimate = stochastic::empirical_laplace_sums(&a, &sums)?;
                    let body = json!({"exact": exact, "estimate": estimate});
                    Ok(Outcome::ok(body.to_string()))
                }
                None => {
                    let mut drawn = Vec::with_capacity(cli.samples as usize);
                    for i in 0..cli.samples {
                        let sum =
                            stochastic::sample_levy_terms(&nu, *t, cli.seed.wrapping_add(i))?;
                        drawn.push(sum.materialize(size_budget(cli))?);
                    }
                    Ok(Outcome::ok(samples_to_json(&drawn)))
                }
            }
        }
        Verb::SampleLepage { stable, spec } => {
            let st = parse_stable(&read(stable)?, cli.tol)?;
            match spec {
                Some(path) => {
                    let a = load_spec(path)?;
                    let exact = stochastic::stable_laplace_quadrature(&a, st.alpha(), st.base())?;
                    let estimate = stochastic::lepage_laplace_empirical(
                        &st,
                        std::slice::from_ref(&a),
                        1.0,
                        cli.samples as usize,
                        cli.seed,
                    )?
                    .remove(0);
                    let body = json!({"exact": exact, "estimate": estimate});
                    Ok(Outcome::ok(body.to_string()))
                }
                None => {
                    let mut drawn = Vec::with_capacity(cli.samples as usize);
                    for i in 0..cli.samples {
                        let sum =
                            stochastic::sample_lepage_terms(&st, cli.seed.wrapping_add(i))?;
                        drawn.push(sum.materialize(size_budget(cli))?);
                    }
                    Ok(Outcome::ok(samples_to_json(&drawn)))
                }
            }
        }
        Verb::Thin { x, p, spec } => {
            let x = load_space(x)?;
            match spec {
                Some(path) => {
                    let a = load_spec(path)?;
                    let exact = stochastic::thinning_laplace_exact(&a, &x, *p)?;
                    let drawn = (0..cli.samples)
                        .map(|i| stochastic::thin(&x, *p, cli.seed.wrapping_add(i)))
                        .collect::<Result<Vec<_>>>()?;
                    let estimate = stochastic::empirical_laplace(&a, &drawn)?;
                    let body = json!({"exact": exact, "estimate": estimate});
                    Ok(Outcome::ok(body.to_string()))
                }
                None => {
                    let drawn = (0..cli.samples)
                        .map(|i| stochastic::thin(&x, *p, cli.seed.wrapping_add(i)))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(Outcome::ok(samples_to_json(&drawn)))
                }
            }
        }
        Verb::DiscreteStable { base, alpha, c } => {
            let y = load_space(base)?;
            let count = stochastic::sample_discrete_stable_count(*alpha, *c, cli.seed)?;
            let space = stochastic::discrete_stable_space(*alpha, *c, &y, cli.seed)?;
            let body = DiscreteStableBody {
                count,
                space: nested(space_to_json(&space)),
            };
            Ok(Outcome::ok(to_body(&body)?))
        }
        Verb::TestEqual { xs, ys, panel } => {
            let xs = parse_samples(&read(xs)?)?;
            let ys = parse_samples(&read(ys)?)?;
            let (panel, z) = parse_panel(&read(panel)?)?;
            let report = stochastic::equality_test(&xs, &ys, &panel, z.unwrap_or(DEFAULT_Z))?;
            let reject = report.reject;
            Ok(Outcome {
                body: serde_json::to_string(&report)
                    .map_err(|e| Error::ParseError(format!("serialize report: {e}")))?,
                reject,
            })
        }
        Verb::TestStable {
            stable,
            a,
            b,
            panel,
        } => {
            let st = parse_stable(&read(stable)?, cli.tol)?;
            let (panel, _) = parse_panel(&read(panel)?)?;
            let report = stochastic::stability_check(
                &st,
                *a,
                *b,
                &panel,
                cli.samples as usize,
                cli.seed,
            )?;
            let reject = report.reject;
            Ok(Outcome {
                body: serde_json::to_string(&report)
                    .map_err(|e| Error::ParseError(format!("serialize report: {e}")))?,
                reject,
            })
        }
        Verb::LlnDemo { dist, spec, n } => {
            let dist = parse_distribution(&read(dist)?)?;
            let a = load_spec(spec)?;
            let exact = stochastic::lln_limit_exact(&a, &dist);
            let estimate =
                stochastic::lln_empirical(&a, &dist, *n, cli.samples as usize, cli.seed)?;
            let body = json!({"exact": exact, "estimate": estimate});
            Ok(Outcome::ok(body.to_string()))
        }
    }
}
