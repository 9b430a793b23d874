//! JSON interchange layer.
//!
//! Every document format is strict: unknown fields are rejected, wire-level
//! shape problems (ragged matrices, length disagreements, out-of-range
//! 1-based indices) are reported as [`Error::ParseError`] before any semantic
//! validation runs, and semantic errors come back unchanged from the
//! underlying constructors. Serialization uses the shortest decimal form
//! that round-trips each float exactly, so serialize-then-parse is the
//! identity bit for bit.
//!
//! Formats:
//!
//! * space: `{"n": 2, "dist": [[0.0, 1.0], [1.0, 0.0]], "weights": [0.5, 0.5]}`
//! * semicharacter (1-based pairs): `{"n": 3, "a": [[1, 2, 0.5]]}`; the empty
//!   spec is `{"n": 0, "a": []}`
//! * discrete distribution: `{"atoms": [{"space": …, "p": 0.5}, …]}`
//! * Levy measure: `{"atoms": [{"space": …, "mass": 2.0}, …]}`
//! * stable spec: `{"alpha": 0.5, "base": …, "tail_tol": 0.001}` with
//!   `tail_tol` optional on input
//! * factorization: `{"factors": [{"space": …, "mult": 2}, …]}` in canonical
//!   key order
//! * distance certificate: `{"epsilon": …, "cross_dist": […], "coupling": […]}`
//! * two measures on one metric: `{"mu1": […], "mu2": […], "dist": [[…]]}`
//! * semicharacter panel: `{"panel": [spec, …], "z": 3.0}` with `z` optional
//! * sample list: `{"samples": [space, …]}`

use serde::{Deserialize, Serialize};

use crate::factor::Factorization;
use crate::functionals::Semicharacter;
use crate::prohorov::DgprCertificate;
use crate::space::FiniteMMSpace;
use crate::stochastic::{DiscreteDistribution, LevyMeasure, StableSpec};
use crate::{Error, Result};

fn decode<'a, T: Deserialize<'a>>(s: &'a str) -> Result<T> {
    serde_json::from_str(s).map_err(|e| Error::ParseError(e.to_string()))
}

fn encode<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("serializing validated data cannot fail")
}

// ---------------------------------------------------------------------------
// Spaces
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpaceDoc {
    n: usize,
    dist: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

fn space_from_doc(doc: SpaceDoc) -> Result<FiniteMMSpace> {
    if doc.dist.len() != doc.n {
        return Err(Error::ParseError(format!(
            "\"n\" is {} but \"dist\" has {} rows",
            doc.n,
            doc.dist.len()
        )));
    }
    for (i, row) in doc.dist.iter().enumerate() {
        if row.len() != doc.n {
            return Err(Error::ParseError(format!(
                "\"dist\" row {} has {} entries, expected {}",
                i,
                row.len(),
                doc.n
            )));
        }
    }
    if doc.weights.len() != doc.n {
        return Err(Error::ParseError(format!(
            "\"n\" is {} but \"weights\" has {} entries",
            doc.n,
            doc.weights.len()
        )));
    }
    FiniteMMSpace::new(doc.dist, doc.weights)
}

fn doc_from_space(x: &FiniteMMSpace) -> SpaceDoc {
    SpaceDoc {
        n: x.n(),
        dist: x.dist_rows(),
        weights: x.weights().to_vec(),
    }
}

/// Parses a space document, reporting shape problems as [`Error::ParseError`]
/// and semantic problems with the constructor's own error.
pub fn parse_space(s: &str) -> Result<FiniteMMSpace> {
    space_from_doc(decode(s)?)
}

/// Serializes a space to its canonical one-line document.
pub fn space_to_json(x: &FiniteMMSpace) -> String {
    encode(&doc_from_space(x))
}

// ---------------------------------------------------------------------------
// Semicharacter specs
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SemicharacterDoc {
    n: usize,
    a: Vec<(usize, usize, f64)>,
}

/// Parses a semicharacter spec. Wire pairs are 1-based; `{"n":0,"a":[]}` is
/// the empty spec.
pub fn parse_semicharacter(s: &str) -> Result<Semicharacter> {
    let doc: SemicharacterDoc = decode(s)?;
    let mut entries = Vec::with_capacity(doc.a.len());
    for &(i, j, a) in &doc.a {
        if i == 0 || j == 0 {
            return Err(Error::ParseError(format!(
                "pair indices are 1-based; got ({i},{j})"
            )));
        }
        entries.push((i - 1, j - 1, a));
    }
    Semicharacter::new(doc.n, entries)
}

/// Serializes a semicharacter spec with 1-based pairs.
pub fn semicharacter_to_json(spec: &Semicharacter) -> String {
    let doc = SemicharacterDoc {
        n: spec.order(),
        a: spec
            .entries()
            .iter()
            .map(|&(i, j, a)| (i + 1, j + 1, a))
            .collect(),
    };
    encode(&doc)
}

// ---------------------------------------------------------------------------
// Discrete distributions and Levy measures
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DistributionDoc {
    atoms: Vec<DistributionAtomDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DistributionAtomDoc {
    space: SpaceDoc,
    p: f64,
}

fn distribution_from_doc(doc: DistributionDoc) -> Result<DiscreteDistribution> {
    let mut atoms = Vec::with_capacity(doc.atoms.len());
    for atom in doc.atoms {
        atoms.push((space_from_doc(atom.space)?, atom.p));
    }
    DiscreteDistribution::new(atoms)
}

fn doc_from_distribution(dist: &DiscreteDistribution) -> DistributionDoc {
    DistributionDoc {
        atoms: dist
            .atoms()
            .iter()
            .map(|(space, p)| DistributionAtomDoc {
                space: doc_from_space(space),
                p: *p,
            })
            .collect(),
    }
}

/// Parses a finitely supported distribution on spaces.
pub fn parse_distribution(s: &str) -> Result<DiscreteDistribution> {
    distribution_from_doc(decode(s)?)
}

/// Serializes a finitely supported distribution on spaces.
pub fn distribution_to_json(dist: &DiscreteDistribution) -> String {
    encode(&doc_from_distribution(dist))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LevyDoc {
    atoms: Vec<LevyAtomDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LevyAtomDoc {
    space: SpaceDoc,
    mass: f64,
}

/// Parses a finite Levy measure on nontrivial spaces.
pub fn parse_levy(s: &str) -> Result<LevyMeasure> {
    let doc: LevyDoc = decode(s)?;
    let mut atoms = Vec::with_capacity(doc.atoms.len());
    for atom in doc.atoms {
        atoms.push((space_from_doc(atom.space)?, atom.mass));
    }
    LevyMeasure::new(atoms)
}

/// Serializes a finite Levy measure.
pub fn levy_to_json(levy: &LevyMeasure) -> String {
    let doc = LevyDoc {
        atoms: levy
            .atoms()
            .iter()
            .map(|(space, mass)| LevyAtomDoc {
                space: doc_from_space(space),
                mass: *mass,
            })
            .collect(),
    };
    encode(&doc)
}

// ---------------------------------------------------------------------------
// Stable specs
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StableDoc {
    alpha: f64,
    base: DistributionDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    tail_tol: Option<f64>,
}

/// Parses a stable sampling spec; a missing `tail_tol` takes
/// `default_tail_tol` (the CLI passes its `--tol` flag here).
pub fn parse_stable(s: &str, default_tail_tol: f64) -> Result<StableSpec> {
    let doc: StableDoc = decode(s)?;
    let base = distribution_from_doc(doc.base)?;
    StableSpec::new(doc.alpha, base, doc.tail_tol.unwrap_or(default_tail_tol))
}

/// Serializes a stable sampling spec, always including `tail_tol`.
pub fn stable_to_json(spec: &StableSpec) -> String {
    let doc = StableDoc {
        alpha: spec.alpha(),
        base: doc_from_distribution(spec.base()),
        tail_tol: Some(spec.tail_tol()),
    };
    encode(&doc)
}

// ---------------------------------------------------------------------------
// Factorizations
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactorizationDoc {
    factors: Vec<FactorDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactorDoc {
    space: SpaceDoc,
    mult: u32,
}

/// Parses a factorization document; every factor must be irreducible.
pub fn parse_factorization(s: &str) -> Result<Factorization> {
    let doc: FactorizationDoc = decode(s)?;
    let mut factors = Vec::with_capacity(doc.factors.len());
    for factor in doc.factors {
        factors.push((space_from_doc(factor.space)?, factor.mult));
    }
    Factorization::from_factors(factors)
}

/// Serializes a factorization with factors in canonical key order.
pub fn factorization_to_json(f: &Factorization) -> String {
    let doc = FactorizationDoc {
        factors: f
            .iter()
            .map(|(space, mult)| FactorDoc {
                space: doc_from_space(space),
                mult,
            })
            .collect(),
    };
    encode(&doc)
}

// ---------------------------------------------------------------------------
// Distance certificates
// ---------------------------------------------------------------------------

/// Parses a Gromov-Prohorov upper-bound certificate. Only wire-level
/// problems are reported here; use
/// [`verify_certificate`](crate::prohorov::verify_certificate) for the
/// mathematical checks.
pub fn parse_certificate(s: &str) -> Result<DgprCertificate> {
    decode(s)
}

/// Serializes a certificate.
pub fn certificate_to_json(cert: &DgprCertificate) -> String {
    encode(cert)
}

// ---------------------------------------------------------------------------
// Two measures on a common metric
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProhorovDoc {
    mu1: Vec<f64>,
    mu2: Vec<f64>,
    dist: Vec<Vec<f64>>,
}

/// Two measures and the square distance matrix they share, as parsed from a
/// prohorov-input document.
pub type ProhorovInput = (Vec<f64>, Vec<f64>, Vec<Vec<f64>>);

/// Parses a document holding two measures on one common finite metric. The
/// matrix must be square with side `mu1.len() == mu2.len()`; the semantic
/// checks live in [`prohorov`](crate::prohorov::prohorov).
pub fn parse_prohorov_input(s: &str) -> Result<ProhorovInput> {
    let doc: ProhorovDoc = decode(s)?;
    let n = doc.mu1.len();
    if doc.mu2.len() != n {
        return Err(Error::ParseError(format!(
            "\"mu1\" has {} entries but \"mu2\" has {}",
            n,
            doc.mu2.len()
        )));
    }
    if doc.dist.len() != n {
        return Err(Error::ParseError(format!(
            "\"dist\" has {} rows, expected {}",
            doc.dist.len(),
            n
        )));
    }
    for (i, row) in doc.dist.iter().enumerate() {
        if row.len() != n {
            return Err(Error::ParseError(format!(
                "\"dist\" row {} has {} entries, expected {}",
                i,
                row.len(),
                n
            )));
        }
    }
    Ok((doc.mu1, doc.mu2, doc.dist))
}

// ---------------------------------------------------------------------------
// Panels and sample lists
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PanelDoc {
    panel: Vec<SemicharacterDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    z: Option<f64>,
}

/// Parses a panel of semicharacter specs plus an optional rejection
/// threshold `z`.
pub fn parse_panel(s: &str) -> Result<(Vec<Semicharacter>, Option<f64>)> {
    let doc: PanelDoc = decode(s)?;
    let mut panel = Vec::with_capacity(doc.panel.len());
    for spec in doc.panel {
        panel.push(parse_semicharacter(&encode(&spec))?);
    }
    Ok((panel, doc.z))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SamplesDoc {
    samples: Vec<SpaceDoc>,
}

/// Parses a list of sampled spaces.
pub fn parse_samples(s: &str) -> Result<Vec<FiniteMMSpace>> {
    let doc: SamplesDoc = decode(s)?;
    doc.samples.into_iter().map(space_from_doc).collect()
}

/// Serializes a list of sampled spaces.
pub fn samples_to_json(samples: &[FiniteMMSpace]) -> String {
    let doc = SamplesDoc {
        samples: samples.iter().map(doc_from_space).collect(),
    };
    encode(&doc)
}

// ---------------------------------------------------------------------------
