//! Unique factorization into irreducible spaces.
//!
//! Every finite metric measure space decomposes as a product of irreducible
//! ("prime") spaces, uniquely up to order and isomorphism. The split search
//! exploits the grid geometry of a product: if `X = Y x Z` with the sum
//! metric and product measure, then fixing a grid origin (point 0), the copy
//! of `Y` through the origin is a subset `L` containing 0, the copy of `Z`
//! is the fiber `M` over the origin, every point projects onto `L` along a
//! geodesic through its fiber, and `r(0, x) = r(0, l) + r(0, m)` splits
//! additively. The search backtracks over candidate layers `L`, prunes
//! branches whose origin fiber cannot reach the required size, assigns
//! coordinates to every point, and verifies full additivity of the metric
//! and the rank-1 (product) structure of the weights.
//!
//! Tolerance layering: candidate structures are admitted at the loose
//! ambiguity tolerance so that near-miss grids survive to the final
//! classification; a grid is *accepted* only at the strict metric tolerance.
//! If no clean split exists but a near-tolerance one does, the search
//! reports [`Error::AmbiguousFactorization`] instead of silently choosing.

use crate::num::{self, AMBIGUITY_TOL, DEFAULT_SIZE_BUDGET, FACTOR_MAX_POINTS, METRIC_TOL};
use crate::space::{CanonicalKey, FiniteMMSpace};
use crate::{Error, Result};

/// Backtracking node budget for one split search; adversarially colinear
/// inputs (e.g. line metrics) exhaust it and report `TooLarge`.
const NODE_BUDGET: u64 = 2_000_000;

// ---------------------------------------------------------------------------
// Split search
// ---------------------------------------------------------------------------

struct SplitSearch<'a> {
    x: &'a FiniteMMSpace,
    n: usize,
    /// Loose tolerance (absolute, pre-scaled): forcing decisions.
    loose: f64,
    /// Strict tolerance (absolute, pre-scaled): clean acceptance.
    strict: f64,
    /// Scale factor used to report relative residuals.
    scale: f64,
    nodes: u64,
    near_miss: Option<f64>,
}

impl<'a> SplitSearch<'a> {
    fn new(x: &'a FiniteMMSpace) -> Self {
        let scale = 1f64.max(x.diam());
        SplitSearch {
            x,
            n: x.n(),
            loose: AMBIGUITY_TOL * scale,
            strict: METRIC_TOL * scale,
            scale,
            nodes: 0,
            near_miss: None,
        }
    }

    fn charge(&mut self, amount: u64) -> Result<()> {
        self.nodes += amount;
        if self.nodes > NODE_BUDGET {
            return Err(Error::TooLarge(format!(
                "factor search exceeded {NODE_BUDGET} nodes on {} points",
                self.n
            )));
        }
        Ok(())
    }

    fn colinear(&self, l: usize, m: usize) -> bool {
        (self.x.d(l, m) - self.x.d(0, l) - self.x.d(0, m)).abs() <= self.loose
    }

    /// Points that could still lie on the origin fiber given the chosen
    /// layer prefix: every layer point must see them colinearly through 0.
    fn fiber_candidate_count(&self, layer: &[usize]) -> usize {
        (0..self.n)
            .filter(|&m| layer.iter().skip(1).all(|&l| self.colinear(l, m)))
            .count()
    }

    fn search_divisor(&mut self, p: usize) -> Result<Option<(FiniteMMSpace, FiniteMMSpace)>> {
        let q = self.n / p;
        let mut layer = vec![0usize];
        self.extend_layer(&mut layer, p, q)
    }

    fn extend_layer(
        &mut self,
        layer: &mut Vec<usize>,
        p: usize,
        q: usize,
    ) -> Result<Option<(FiniteMMSpace, FiniteMMSpace)>> {
        self.charge(1)?;
        if layer.len() == p {
            return self.try_grid(layer, q);
        }
        let start = layer.last().copied().unwrap_or(0) + 1;
        let needed = p - layer.len();
        for next in start..self.n {
            if self.n - next < needed {
                break;
            }
            layer.push(next);
            if self.fiber_candidate_count(layer) >= q {
                if let Some(split) = self.extend_layer(layer, p, q)? {
                    return Ok(Some(split));
                }
            }
            layer.pop();
        }
        Ok(None)
    }

    /// Attempt to realize the full grid for a complete layer: project every
    /// point onto the layer, extract the origin fiber, assign fiber
    /// coordinates, and verify additivity plus the rank-1 weight structure.
    fn try_grid(
        &mut self,
        layer: &[usize],
        q: usize,
    ) -> Result<Option<(FiniteMMSpace, FiniteMMSpace)>> {
        let n = self.n;
        let in_layer: Vec<Option<usize>> = {
            let mut v = vec![None; n];
            for (li, &l) in layer.iter().enumerate() {
                v[l] = Some(li);
            }
            v
        };

        // Projection candidates (layer index, fiber offset) per point.
        let mut cands: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        for pt in 0..n {
            if let Some(li) = in_layer[pt] {
                cands.push(vec![(li, 0.0)]);
                continue;
            }
            let mut c = Vec::new();
            for (li, &l) in layer.iter().enumerate() {
                let s = self.x.d(pt, l);
                let ok = layer
                    .iter()
                    .all(|&l2| (self.x.d(pt, l2) - self.x.d(l, l2) - s).abs() <= self.loose);
                if ok {
                    c.push((li, s));
                }
            }
            if c.is_empty() {
                return Ok(None);
            }
            cands.push(c);
        }

        // Enumerate assignment combinations in mixed radix; generic inputs
        // have a single candidate per point so this loop runs once.
        let mut combos: u64 = 1;
        for c in &cands {
            combos = combos.saturating_mul(c.len() as u64);
            if combos > 4096 {
                break;
            }
        }
        let combos = combos.min(4096);
        let mut choice = vec![0usize; n];
        for combo in 0..combos {
            self.charge(n as u64)?;
            let mut rest = combo;
            for (pt, c) in cands.iter().enumerate() {
                choice[pt] = (rest % c.len() as u64) as usize;
                rest /= c.len() as u64;
            }
            if let Some(split) = self.verify_assignment(layer, q, &cands, &choice)? {
                return Ok(Some(split));
            }
        }
        Ok(None)
    }

    fn verify_assignment(
        &mut self,
        layer: &[usize],
        q: usize,
        cands: &[Vec<(usize, f64)>],
        choice: &[usize],
    ) -> Result<Option<(FiniteMMSpace, FiniteMMSpace)>> {
        let n = self.n;
        let p = layer.len();
        let proj: Vec<(usize, f64)> = (0..n).map(|pt| cands[pt][choice[pt]]).collect();

        // Fibers must all have the required size.
        let mut fiber_size = vec![0usize; p];
        for &(li, _) in &proj {
            fiber_size[li] += 1;
        }
        if fiber_size.iter().any(|&s| s != q) {
            return Ok(None);
        }

        // The origin fiber is the copy of the second factor.
        let fiber0: Vec<usize> = (0..n).filter(|&pt| proj[pt].0 == 0).collect();
        debug_assert_eq!(fiber0.len(), q);

        // Assign each point a fiber coordinate: the origin-fiber point at
        // the same offset whose distance to the point equals the pure layer
        // distance. The first match (in fiber order) is taken; if that was
        // the wrong twin of a near-duplicate, the residual classification
        // below reports the ambiguity instead of accepting.
        let mut coord = vec![usize::MAX; n];
        for pt in 0..n {
            let (li, s) = proj[pt];
            let want = self.x.d(layer[li], layer[0]);
            let mut found = usize::MAX;
            for (mi, &m) in fiber0.iter().enumerate() {
                if (proj[m].1 - s).abs() <= self.loose
                    && (self.x.d(pt, m) - want).abs() <= self.loose
                {
                    found = mi;
                    break;
                }
            }
            if found == usize::MAX {
                return Ok(None);
            }
            coord[pt] = found;
        }

        // The coordinate map must be a bijection onto the p x q grid.
        let mut seen = vec![false; n];
        for pt in 0..n {
            let cell = proj[pt].0 * q + coord[pt];
            if seen[cell] {
                return Ok(None);
            }
            seen[cell] = true;
        }

        // Marginal weights.
        let mut u_layer = vec![0.0f64; p];
        let mut u_fiber = vec![0.0f64; q];
        for pt in 0..n {
            u_layer[proj[pt].0] += self.x.weight(pt);
            u_fiber[coord[pt]] += self.x.weight(pt);
        }

        // Residuals: metric additivity (scaled) and rank-1 weights.
        self.charge((n * n / 2) as u64)?;
        let mut metric_dev = 0.0f64;
        for a in 0..n {
            for b in (a + 1)..n {
                let dl = self.x.d(layer[proj[a].0], layer[proj[b].0]);
                let dm = self.x.d(fiber0[coord[a]], fiber0[coord[b]]);
                metric_dev = metric_dev.max((self.x.d(a, b) - dl - dm).abs());
            }
        }
        let mut weight_dev = 0.0f64;
        for pt in 0..n {
            weight_dev =
                weight_dev.max((self.x.weight(pt) - u_layer[proj[pt].0] * u_fiber[coord[pt]]).abs());
        }
        let residual = (metric_dev / self.scale).max(weight_dev);

        if metric_dev <= self.strict && weight_dev <= METRIC_TOL {
            let build = |pts: &[usize], u: &[f64]| -> Result<FiniteMMSpace> {
                let rows: Vec<Vec<f64>> = pts
                    .iter()
                    .map(|&a| pts.iter().map(|&b| self.x.d(a, b)).collect())
                    .collect();
                FiniteMMSpace::new(rows, u.to_vec())
            };
            let y = build(layer, &u_layer)?;
            let z = build(&fiber0, &u_fiber)?;
            return Ok(Some((y, z)));
        }
        if metric_dev <= self.loose && weight_dev <= AMBIGUITY_TOL {
            self.near_miss = Some(match self.near_miss {
                Some(r) => r.min(residual),
                None => residual,
            });
        }
        Ok(None)
    }
}

/// Searches for a nontrivial split `X = Y boxplus Z`. Returns one such pair
/// if the space is a product, `None` if it is irreducible (or trivial), an
/// [`Error::AmbiguousFactorization`] if only near-tolerance grids exist, and
/// [`Error::TooLarge`] beyond 64 points or when the backtracking budget is
/// exhausted.
pub fn find_factor_split(
    x: &FiniteMMSpace,
) -> Result<Option<(FiniteMMSpace, FiniteMMSpace)>> {
    let n = x.n();
    if n > FACTOR_MAX_POINTS {
        return Err(Error::TooLarge(format!(
            "factor search supports at most {FACTOR_MAX_POINTS} points, got {n}"
        )));
    }
    if n < 4 {
        return Ok(None);
    }
    let mut search = SplitSearch::new(x);
    let mut p = 2usize;
    while p * p <= n {
        if n.is_multiple_of(p) {
            if let Some(split) = search.search_divisor(p)? {
                return Ok(Some(split));
            }
        }
        p += 1;
    }
    match search.near_miss {
        Some(residual) => Err(Error::AmbiguousFactorization { residual }),
        None => Ok(None),
    }
}

/// A space is irreducible when it is nontrivial and admits no split.
pub fn is_irreducible(x: &FiniteMMSpace) -> Result<bool> {
    if x.is_trivial() {
        return Ok(false);
    }
    Ok(find_factor_split(x)?.is_none())
}

// ---------------------------------------------------------------------------
// Factorization type
// ---------------------------------------------------------------------------

/// A finite multiset of irreducible factors with multiplicities, kept in
/// canonical labeling and sorted by canonical key. The empty factorization
/// represents the trivial space.
#[derive(Debug, Clone)]
pub struct Factorization {
    items: Vec<(CanonicalKey, FiniteMMSpace, u32)>,
}

impl PartialEq for Factorization {
    fn eq(&self, other: &Self) -> bool {
        self.items.len() == other.items.len()
            && self
                .items
                .iter()
                .zip(&other.items)
                .all(|(a, b)| a.0 == b.0 && a.2 == b.2)
    }
}
impl Eq for Factorization {}

impl Factorization {
    /// The factorization of the trivial space.
    pub fn empty() -> Self {
        Factorization { items: Vec::new() }
    }

    /// Builds a factorization from explicit factors, canonicalizing each,
    /// merging isomorphic ones, and checking that every factor is
    /// irreducible (multiplicities must be positive).
    pub fn from_factors(factors: Vec<(FiniteMMSpace, u32)>) -> Result<Self> {
        let mut items: Vec<(CanonicalKey, FiniteMMSpace, u32)> = Vec::new();
        for (space, mult) in factors {
            if mult == 0 {
                return Err(Error::BadSpec("factor multiplicity must be positive".into()));
            }
            if !is_irreducible(&space)? {
                return Err(Error::BadSpec(format!(
                    "factor on {} points is not irreducible",
                    space.n()
                )));
            }
            let canon = space.canonicalized();
            let key = canon.canonical_key();
            match items.iter_mut().find(|(k, _, _)| *k == key) {
                Some(entry) => entry.2 += mult,
                None => items.push((key, canon, mult)),
            }
        }
        items.sort_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
        Ok(Factorization { items })
    }

    /// Internal constructor for factors already known to be irreducible and
    /// canonical.
    fn from_canonical_parts(mut items: Vec<(CanonicalKey, FiniteMMSpace, u32)>) -> Self {
        items.sort_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
        Factorization { items }
    }

    /// Iterates `(factor, multiplicity)` pairs in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (&FiniteMMSpace, u32)> {
        self.items.iter().map(|(_, s, m)| (s, *m))
    }

    /// Number of distinct factors.
    pub fn distinct_factors(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Total point count of the product, saturating.
    pub fn product_points(&self) -> u128 {
        let mut total: u128 = 1;
        for (_, s, m) in &self.items {
            for _ in 0..*m {
                total = total.saturating_mul(s.n() as u128);
            }
        }
        total
    }

    /// Multiset union (the factorization of a product).
    pub fn union(&self, other: &Self) -> Self {
        self.merge(other, |a, b| a + b)
    }

    /// Multiset containment: does `self` divide `other`?
    pub fn divides(&self, other: &Self) -> bool {
        self.items.iter().all(|(k, _, m)| {
            other
                .items
                .iter()
                .any(|(k2, _, m2)| k2 == k && m2 >= m)
        })
    }

    /// Multiset difference; errors with [`Error::NotDivisible`] when `other`
    /// does not divide `self`.
    pub fn quotient(&self, other: &Self) -> Result<Self> {
        if !other.divides(self) {
            return Err(Error::NotDivisible);
        }
        let items = self
            .items
            .iter()
            .filter_map(|(k, s, m)| {
                let m2 = other
                    .items
                    .iter()
                    .find(|(k2, _, _)| k2 == k)
                    .map_or(0, |(_, _, m2)| *m2);
                let left = m - m2;
                (left > 0).then(|| (k.clone(), s.clone(), left))
            })
            .collect();
        Ok(Factorization::from_canonical_parts(items))
    }

    /// Multiplicity-wise minimum.
    pub fn meet(&self, other: &Self) -> Self {
        let items = self
            .items
            .iter()
            .filter_map(|(k, s, m)| {
                other
                    .items
                    .iter()
                    .find(|(k2, _, _)| k2 == k)
                    .map(|(_, _, m2)| (k.clone(), s.clone(), (*m).min(*m2)))
            })
            .collect();
        Factorization::from_canonical_parts(items)
    }

    /// Multiplicity-wise maximum.
    pub fn join(&self, other: &Self) -> Self {
        self.merge(other, |a, b| a.max(b))
    }

    /// The k-th root if every multiplicity is divisible by k.
    pub fn nth_root(&self, k: u32) -> Result<Option<Self>> {
        if k < 2 {
            return Err(Error::BadSpec(format!("root order must be at least 2, got {k}")));
        }
        if self.items.iter().any(|(_, _, m)| m % k != 0) {
            return Ok(None);
        }
        let items = self
            .items
            .iter()
            .map(|(key, s, m)| (key.clone(), s.clone(), m / k))
            .collect();
        Ok(Some(Factorization::from_canonical_parts(items)))
    }

    /// Key-aligned merge treating missing entries as multiplicity 0; entries
    /// whose combined multiplicity is 0 are dropped.
    fn merge(&self, other: &Self, f: impl Fn(u32, u32) -> u32) -> Self {
        let mut items: Vec<(CanonicalKey, FiniteMMSpace, u32)> = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.items.len() || j < other.items.len() {
            let take_left = match (self.items.get(i), other.items.get(j)) {
                (Some(a), Some(b)) => match a.0.as_bytes().cmp(b.0.as_bytes()) {
                    std::cmp::Ordering::Less => Some(true),
                    std::cmp::Ordering::Greater => Some(false),
                    std::cmp::Ordering::Equal => None,
                },
                (Some(_), None) => Some(true),
                (None, Some(_)) => Some(false),
                (None, None) => unreachable!(),
            };
            let (key, space, mult) = match take_left {
                Some(true) => {
                    let (k, s, m) = &self.items[i];
                    i += 1;
                    (k.clone(), s.clone(), f(*m, 0))
                }
                Some(false) => {
                    let (k, s, m) = &other.items[j];
                    j += 1;
                    (k.clone(), s.clone(), f(0, *m))
                }
                None => {
                    let (k, s, m) = &self.items[i];
                    let m2 = other.items[j].2;
                    i += 1;
                    j += 1;
                    (k.clone(), s.clone(), f(*m, m2))
                }
            };
            if mult > 0 {
                items.push((key, space, mult));
            }
        }
        Factorization { items }
    }
}

// ---------------------------------------------------------------------------
// Operations on spaces via their factorizations
// ---------------------------------------------------------------------------

/// Full prime factorization; the single source of truth for the divisibility
/// lattice below.
pub fn factorize(x: &FiniteMMSpace) -> Result<Factorization> {
    if x.is_trivial() {
        return Ok(Factorization::empty());
    }
    match find_factor_split(x)? {
        None => {
            let canon = x.canonicalized();
            let key = canon.canonical_key();
            Ok(Factorization::from_canonical_parts(vec![(key, canon, 1)]))
        }
        Some((y, z)) => Ok(factorize(&y)?.union(&factorize(&z)?)),
    }
}

/// Alias for [`factorize`]: the semigroup-to-multiset direction of the
/// factorization bijection.
pub fn psi(x: &FiniteMMSpace) -> Result<Factorization> {
    factorize(x)
}

/// Rebuilds the product space of a factorization (the inverse direction),
/// respecting the given size budget.
pub fn sigma_budget(f: &Factorization, budget: usize) -> Result<FiniteMMSpace> {
    let mut acc = FiniteMMSpace::trivial();
    for (space, mult) in f.iter() {
        let pow = space.boxplus_pow_budget(mult, budget)?;
        acc = acc.boxplus_budget(&pow, budget)?;
    }
    Ok(acc)
}

/// [`sigma_budget`] with the default size budget.
pub fn sigma(f: &Factorization) -> Result<FiniteMMSpace> {
    sigma_budget(f, DEFAULT_SIZE_BUDGET)
}

/// Does `y` divide `x` in the product semigroup?
pub fn divides(y: &FiniteMMSpace, x: &FiniteMMSpace) -> Result<bool> {
    Ok(factorize(y)?.divides(&factorize(x)?))
}

/// The unique `Z` with `X = Y boxplus Z`; errors with
/// [`Error::NotDivisible`] when there is none.
pub fn quotient(x: &FiniteMMSpace, y: &FiniteMMSpace) -> Result<FiniteMMSpace> {
    let f = factorize(x)?.quotient(&factorize(y)?)?;
    sigma_budget(&f, x.n().max(num::DEFAULT_SIZE_BUDGET))
}

/// Greatest common divisor in the factorization lattice.
pub fn meet(x: &FiniteMMSpace, y: &FiniteMMSpace) -> Result<FiniteMMSpace> {
    let f = factorize(x)?.meet(&factorize(y)?);
    sigma_budget(&f, x.n().max(y.n()).max(num::DEFAULT_SIZE_BUDGET))
}

/// Least common multiple in the factorization lattice.
pub fn join(x: &FiniteMMSpace, y: &FiniteMMSpace) -> Result<FiniteMMSpace> {
    let f = factorize(x)?.join(&factorize(y)?);
    sigma_budget(&f, (x.n() * y.n()).max(num::DEFAULT_SIZE_BUDGET))
}

/// The unique k-th root when it exists: `W` with `W^{boxplus k} = X`.
pub fn nth_root(x: &FiniteMMSpace, k: u32) -> Result<Option<FiniteMMSpace>> {
    match factorize(x)?.nth_root(k)? {
        None => Ok(None),
        Some(f) => Ok(Some(sigma_budget(&f, x.n().max(num::DEFAULT_SIZE_BUDGET))?)),
    }
}
