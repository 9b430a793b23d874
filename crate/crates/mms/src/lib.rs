//! Finite metric measure spaces as a commutative semigroup.
//!
//! A value of [`FiniteMMSpace`] is a finite metric space together with a
//! full-support probability measure. The binary operation is the box-plus
//! product: Cartesian product of the point sets, *sum* metric, product
//! measure. This crate provides
//!
//! * exact semicharacter functionals (Laplace-transform-like quantities that
//!   turn box-plus into multiplication) in [`functionals`],
//! * Prohorov and Gromov-Prohorov distance computations with independently
//!   re-verifiable upper-bound certificates in [`prohorov`],
//! * unique prime factorization over the box-plus semigroup in [`factor`],
//! * samplers and verifiers for infinitely divisible, stable, and thinned
//!   random spaces in [`stochastic`],
//! * a JSON interchange layer in [`json`].
//!
//! All values are immutable; every randomized routine takes an explicit seed
//! and derives one RNG stream per sample index, so results are independent of
//! worker count.

// Matrix code here indexes rows and columns by name on purpose: the i/j/k
// symmetry of the algorithms is easier to audit than iterator chains.
#![allow(clippy::needless_range_loop)]

pub mod factor;
pub mod functionals;
pub mod json;
pub mod num;
pub mod prohorov;
pub mod space;
pub mod stochastic;
pub mod synth;

pub use factor::Factorization;
pub use functionals::{KappaChainReport, Semicharacter};
pub use prohorov::DgprCertificate;
pub use space::{BoxSum, CanonicalKey, FiniteMMSpace};
pub use stochastic::{
    DiscreteDistribution, EqualityReport, LaplaceEstimate, LevyMeasure, StableSpec,
};

/// Errors shared by every module. The CLI maps these onto its exit codes:
/// budget-class errors exit 2, everything else exits 1.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("not a metric: {0}")]
    NotAMetric(String),
    #[error("bad weights: {0}")]
    BadWeights(String),
    #[error("duplicate points: dist[{i}][{j}] = 0 with i != j")]
    DuplicatePoints { i: usize, j: usize },
    #[error("size overflow: product would have {required} points, budget {budget}")]
    SizeOverflow { required: u128, budget: usize },
    #[error("bad scale factor: {0}")]
    BadScale(String),
    #[error("budget exceeded: {terms} enumeration terms, budget {budget}")]
    BudgetExceeded { terms: u128, budget: u64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("too large: {0}")]
    TooLarge(String),
    #[error("not divisible")]
    NotDivisible,
    #[error("ambiguous factorization: a candidate split verifies only within {residual:e}, between the acceptance and rejection tolerances")]
    AmbiguousFactorization { residual: f64 },
    #[error("not irreducible: {0}")]
    NotIrreducible(String),
    #[error("parse error: {0}")]
    ParseError(String),
    #[error("bad spec: {0}")]
    BadSpec(String),
}

impl Error {
    /// True for the budget-style errors (CLI exit code 2).
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            Error::SizeOverflow { .. } | Error::BudgetExceeded { .. } | Error::TooLarge(_)
        )
    }

    /// Stable machine-readable code used in CLI error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotAMetric(_) => "NotAMetric",
            Error::BadWeights(_) => "BadWeights",
            Error::DuplicatePoints { .. } => "DuplicatePoints",
            Error::SizeOverflow { .. } => "SizeOverflow",
            Error::BadScale(_) => "BadScale",
            Error::BudgetExceeded { .. } => "BudgetExceeded",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::TooLarge(_) => "TooLarge",
            Error::NotDivisible => "NotDivisible",
            Error::AmbiguousFactorization { .. } => "AmbiguousFactorization",
            Error::NotIrreducible(_) => "NotIrreducible",
            Error::ParseError(_) => "ParseError",
            Error::BadSpec(_) => "BadSpec",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
