//! The core value type: a finite metric space with a full-support probability
//! measure, plus the box-plus product (Cartesian points, sum metric, product
//! measure) and its canonical-form machinery.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::num::{
    approx_eq, pairwise_sum, DEFAULT_SIZE_BUDGET, KEY_QUANTUM, METRIC_TOL, WEIGHT_SUM_TOL,
};
use crate::{Error, Result};

/// A finite metric measure space: `n` points, symmetric distance matrix with
/// zero diagonal and triangle inequality, strictly positive weights summing
/// to one. Values are immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMMSpace {
    n: usize,
    dist: Vec<f64>, // row-major n*n
    weights: Vec<f64>,
}

impl FiniteMMSpace {
    /// Validating constructor from a nested distance matrix.
    pub fn new(dist: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let n = weights.len();
        if dist.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "distance matrix has {} rows for {} weights",
                dist.len(),
                n
            )));
        }
        let mut flat = Vec::with_capacity(n * n);
        for (i, row) in dist.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "distance row {} has length {}, expected {}",
                    i,
                    row.len(),
                    n
                )));
            }
            flat.extend_from_slice(row);
        }
        Self::from_flat(flat, weights)
    }

    /// Validating constructor from a row-major flat distance matrix.
    pub fn from_flat(dist: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let n = weights.len();
        if n == 0 {
            return Err(Error::DimensionMismatch(
                "a space must have at least one point".into(),
            ));
        }
        if dist.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "flat distance matrix has {} entries, expected {}",
                dist.len(),
                n * n
            )));
        }
        let space = FiniteMMSpace { n, dist, weights };
        space.validate()?;
        Ok(space)
    }

    fn validate(&self) -> Result<()> {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                let d = self.d(i, j);
                if !d.is_finite() {
                    return Err(Error::NotAMetric(format!("dist[{i}][{j}] is not finite")));
                }
                if d < 0.0 {
                    return Err(Error::NotAMetric(format!("dist[{i}][{j}] = {d} < 0")));
                }
            }
            if self.d(i, i).abs() > METRIC_TOL {
                return Err(Error::NotAMetric(format!(
                    "dist[{i}][{i}] = {} != 0",
                    self.d(i, i)
                )));
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if !approx_eq(self.d(i, j), self.d(j, i)) {
                    return Err(Error::NotAMetric(format!(
                        "asymmetric: dist[{i}][{j}] = {} vs dist[{j}][{i}] = {}",
                        self.d(i, j),
                        self.d(j, i)
                    )));
                }
                if self.d(i, j).abs() <= METRIC_TOL {
                    return Err(Error::DuplicatePoints { i, j });
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let lhs = self.d(i, k);
                    let rhs = self.d(i, j) + self.d(j, k);
                    let scale = 1f64.max(lhs.abs()).max(rhs.abs());
                    if lhs > rhs + METRIC_TOL * scale {
                        return Err(Error::NotAMetric(format!(
                            "triangle violated: dist[{i}][{k}] = {lhs} > dist[{i}][{j}] + dist[{j}][{k}] = {rhs}"
                        )));
                    }
                }
            }
        }
        for (i, &w) in self.weights.iter().enumerate() {
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::BadWeights(format!("weights[{i}] = {w} is not positive")));
            }
        }
        let total = pairwise_sum(&self.weights);
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::BadWeights(format!("weights sum to {total}, not 1")));
        }
        Ok(())
    }

    /// Constructor for values that are valid by construction (products,
    /// scalings, sub-grids of verified products). Debug builds re-validate.
    pub(crate) fn from_parts_unchecked(n: usize, dist: Vec<f64>, weights: Vec<f64>) -> Self {
        let space = FiniteMMSpace { n, dist, weights };
        debug_assert!(space.validate().is_ok(), "internal construction invalid");
        space
    }

    /// The trivial one-point space (the semigroup's neutral element).
    pub fn trivial() -> Self {
        FiniteMMSpace {
            n: 1,
            dist: vec![0.0],
            weights: vec![1.0],
        }
    }

    /// The two-point space with distance `d` and weights `(1-p, p)`.
    pub fn two_point(p: f64, d: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) || !p.is_finite() {
            return Err(Error::BadWeights(format!("two-point weight p = {p} outside (0,1)")));
        }
        if !d.is_finite() || d <= 0.0 {
            return Err(Error::NotAMetric(format!("two-point distance d = {d} not positive")));
        }
        Ok(FiniteMMSpace {
            n: 2,
            dist: vec![0.0, d, d, 0.0],
            weights: vec![1.0 - p, p],
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_trivial(&self) -> bool {
        self.n == 1
    }

    /// Distance between points `i` and `j`.
    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Row-major flat distance matrix.
    pub fn dist_flat(&self) -> &[f64] {
        &self.dist
    }

    pub fn dist_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| self.dist[i * self.n..(i + 1) * self.n].to_vec())
            .collect()
    }

    /// Largest pairwise distance (0 for the trivial space).
    pub fn diam(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// Box-plus product with the default size budget.
    pub fn boxplus(&self, other: &FiniteMMSpace) -> Result<FiniteMMSpace> {
        self.boxplus_budget(other, DEFAULT_SIZE_BUDGET)
    }

    /// Box-plus product: point set X x Y indexed row-major (`i * nY + j`),
    /// distances added coordinatewise, weights multiplied.
    pub fn boxplus_budget(&self, other: &FiniteMMSpace, budget: usize) -> Result<FiniteMMSpace> {
        let required = self.n as u128 * other.n as u128;
        if required > budget as u128 {
            return Err(Error::SizeOverflow { required, budget });
        }
        let n = self.n * other.n;
        let mut dist = vec![0.0; n * n];
        let mut weights = vec![0.0; n];
        for i1 in 0..self.n {
            for j1 in 0..other.n {
                let a = i1 * other.n + j1;
                weights[a] = self.weights[i1] * other.weights[j1];
                for i2 in 0..self.n {
                    let dx = self.d(i1, i2);
                    for j2 in 0..other.n {
                        let b = i2 * other.n + j2;
                        dist[a * n + b] = dx + other.d(j1, j2);
                    }
                }
            }
        }
        Ok(FiniteMMSpace::from_parts_unchecked(n, dist, weights))
    }

    /// `k`-fold box-plus power with the default budget; `k = 0` gives the
    /// trivial space.
    pub fn boxplus_pow(&self, k: u32) -> Result<FiniteMMSpace> {
        self.boxplus_pow_budget(k, DEFAULT_SIZE_BUDGET)
    }

    pub fn boxplus_pow_budget(&self, k: u32, budget: usize) -> Result<FiniteMMSpace> {
        let mut required = 1u128;
        for _ in 0..k {
            required = required.saturating_mul(self.n as u128);
            if required > budget as u128 {
                return Err(Error::SizeOverflow { required, budget });
            }
        }
        let mut acc = FiniteMMSpace::trivial();
        for _ in 0..k {
            acc = acc.boxplus_budget(self, budget)?;
        }
        Ok(acc)
    }

    /// Rescaled space `(X, a*r, mu)`. Requires `a > 0` and finite.
    pub fn scale(&self, a: f64) -> Result<FiniteMMSpace> {
        if !a.is_finite() || a <= 0.0 {
            return Err(Error::BadScale(format!("scale factor {a} must be positive and finite")));
        }
        Ok(FiniteMMSpace {
            n: self.n,
            dist: self.dist.iter().map(|d| a * d).collect(),
            weights: self.weights.clone(),
        })
    }

    /// The space with points relabeled so that new point `k` is old point
    /// `perm[k]`. `perm` must be a permutation of `0..n`.
    pub fn permuted(&self, perm: &[usize]) -> FiniteMMSpace {
        assert_eq!(perm.len(), self.n, "permutation length mismatch");
        let n = self.n;
        let mut dist = vec![0.0; n * n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            weights[i] = self.weights[perm[i]];
            for j in 0..n {
                dist[i * n + j] = self.d(perm[i], perm[j]);
            }
        }
        FiniteMMSpace { n, dist, weights }
    }

    /// Measure-and-metric-preserving bijection test at the crate tolerance.
    pub fn is_isomorphic(&self, other: &FiniteMMSpace) -> bool {
        if self.n != other.n {
            return false;
        }
        let n = self.n;
        // Profile pruning: candidate images must match weight and sorted
        // distance row within tolerance.
        let profile = |s: &FiniteMMSpace, i: usize| -> Vec<f64> {
            let mut row: Vec<f64> = (0..s.n).map(|j| s.d(i, j)).collect();
            row.sort_by(|a, b| a.partial_cmp(b).unwrap());
            row
        };
        let mine: Vec<Vec<f64>> = (0..n).map(|i| profile(self, i)).collect();
        let theirs: Vec<Vec<f64>> = (0..n).map(|j| profile(other, j)).collect();
        let mut compat = vec![vec![false; n]; n];
        for i in 0..n {
            for j in 0..n {
                compat[i][j] = (self.weight(i) - other.weight(j)).abs() <= METRIC_TOL
                    && mine[i]
                        .iter()
                        .zip(theirs[j].iter())
                        .all(|(a, b)| approx_eq(*a, *b));
            }
        }
        let mut assign: Vec<usize> = Vec::with_capacity(n);
        let mut used = vec![false; n];
        self.iso_backtrack(other, &compat, &mut assign, &mut used)
    }

    fn iso_backtrack(
        &self,
        other: &FiniteMMSpace,
        compat: &[Vec<bool>],
        assign: &mut Vec<usize>,
        used: &mut [bool],
    ) -> bool {
        let i = assign.len();
        if i == self.n {
            return true;
        }
        for j in 0..self.n {
            if used[j] || !compat[i][j] {
                continue;
            }
            if !assign
                .iter()
                .enumerate()
                .all(|(k, &jk)| approx_eq(self.d(k, i), other.d(jk, j)))
            {
                continue;
            }
            assign.push(j);
            used[j] = true;
            if self.iso_backtrack(other, compat, assign, used) {
                return true;
            }
            assign.pop();
            used[j] = false;
        }
        false
    }

    /// Canonical key: the lexicographically minimal serialization of
    /// `(weights, dist)` over all relabelings, after rounding every value to
    /// the key quantum. Two spaces have equal keys exactly when they are
    /// isomorphic at that quantum.
    pub fn canonical_key(&self) -> CanonicalKey {
        let (seq, _) = self.canonical_search();
        let mut bytes = Vec::with_capacity(8 + seq.len() * 8);
        bytes.extend_from_slice(&(self.n as u64).to_be_bytes());
        for v in seq {
            bytes.extend_from_slice(&v.to_be_bytes());
        }
        CanonicalKey(bytes)
    }

    /// The space relabeled into its canonical order.
    pub fn canonicalized(&self) -> FiniteMMSpace {
        let (_, perm) = self.canonical_search();
        self.permuted(&perm)
    }

    /// Branch-and-bound search for the lex-minimal quantized serialization.
    /// Placing point `c` at position `k` appends the block
    /// `[qw[c], qd[c][perm[0]], ..., qd[c][perm[k-1]]]`.
    fn canonical_search(&self) -> (Vec<i64>, Vec<usize>) {
        let n = self.n;
        let quant = |x: f64| -> i64 { (x / KEY_QUANTUM).round() as i64 };
        let qw: Vec<i64> = self.weights.iter().map(|&w| quant(w)).collect();
        let qd: Vec<i64> = self.dist.iter().map(|&d| quant(d)).collect();

        struct Search<'a> {
            n: usize,
            qw: &'a [i64],
            qd: &'a [i64],
            best_seq: Vec<i64>,
            best_perm: Vec<usize>,
            have_best: bool,
        }
        impl Search<'_> {
            /// `comparing` means the path prefix equals the incumbent's
            /// prefix, so child blocks may be compared against it. A child
            /// that compares Less descends with `comparing = false` (the
            /// incumbent's deeper slices belong to a different prefix); once
            /// any child returns, the incumbent passes through this node and
            /// comparisons become valid for the remaining siblings.
            fn dfs(
                &mut self,
                perm: &mut Vec<usize>,
                used: &mut [bool],
                seq: &mut Vec<i64>,
                comparing: bool,
            ) {
                if perm.len() == self.n {
                    if !self.have_best || !comparing {
                        self.best_seq = seq.clone();
                        self.best_perm = perm.clone();
                        self.have_best = true;
                    }
                    return;
                }
                let base = seq.len();
                let mut options: Vec<(Vec<i64>, usize)> = Vec::new();
                for c in 0..self.n {
                    if used[c] {
                        continue;
                    }
                    let mut block = Vec::with_capacity(perm.len() + 1);
                    block.push(self.qw[c]);
                    for &p in perm.iter() {
                        block.push(self.qd[c * self.n + p]);
                    }
                    options.push((block, c));
                }
                options.sort();
                let mut cmp_valid = comparing;
                for (block, c) in options {
                    let child_comparing = if self.have_best && cmp_valid {
                        let reference = &self.best_seq[base..base + block.len()];
                        match block.as_slice().cmp(reference) {
                            // Sorted ascending: everything after is larger too.
                            std::cmp::Ordering::Greater => break,
                            std::cmp::Ordering::Equal => true,
                            std::cmp::Ordering::Less => false,
                        }
                    } else {
                        false
                    };
                    seq.extend_from_slice(&block);
                    perm.push(c);
                    used[c] = true;
                    self.dfs(perm, used, seq, child_comparing);
                    used[c] = false;
                    perm.pop();
                    seq.truncate(base);
                    cmp_valid = true;
                }
            }
        }

        let mut search = Search {
            n,
            qw: &qw,
            qd: &qd,
            best_seq: Vec::new(),
            best_perm: Vec::new(),
            have_best: false,
        };
        let mut perm = Vec::with_capacity(n);
        let mut used = vec![false; n];
        let mut seq = Vec::new();
        search.dfs(&mut perm, &mut used, &mut seq, false);
        (search.best_seq, search.best_perm)
    }

    /// `m` i.i.d. draws from the measure, returned as the `m x m` matrix of
    /// pairwise distances. Deterministic for a given seed.
    pub fn sample_distance_matrix(&self, m: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let idx: Vec<usize> = (0..m).map(|_| self.sample_index(&mut rng)).collect();
        idx.iter()
            .map(|&a| idx.iter().map(|&b| self.d(a, b)).collect())
            .collect()
    }

    /// One index draw by inverse CDF over the weights.
    pub(crate) fn sample_index<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen::<f64>();
        let mut acc = 0.0;
        let total = pairwise_sum(&self.weights);
        let target = u * total;
        for (i, &w) in self.weights.iter().enumerate() {
            acc += w;
            if target < acc {
                return i;
            }
        }
        self.n - 1
    }
}

/// Opaque canonical key; ordered bytes. Equal keys mean "isomorphic at the
/// key quantum".
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalKey(Vec<u8>);

impl CanonicalKey {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A box-plus combination kept in factored form: the value it denotes is the
/// box-plus of `terms` (the trivial space when empty). Semicharacters of the
/// denoted space are products over the terms, and the diameter is the sum,
/// so statistical harnesses can work with combinations whose materialized
/// size would be astronomical.
#[derive(Debug, Clone, Default)]
pub struct BoxSum {
    terms: Vec<FiniteMMSpace>,
}

impl BoxSum {
    /// The empty combination (denoting the trivial space).
    pub fn trivial() -> Self {
        BoxSum { terms: Vec::new() }
    }

    pub fn from_terms(terms: Vec<FiniteMMSpace>) -> Self {
        BoxSum { terms }
    }

    /// A single-term combination.
    pub fn from_space(space: FiniteMMSpace) -> Self {
        BoxSum { terms: vec![space] }
    }

    pub fn terms(&self) -> &[FiniteMMSpace] {
        &self.terms
    }

    pub fn push(&mut self, space: FiniteMMSpace) {
        self.terms.push(space);
    }

    /// Diameter of the denoted space: diameters add under box-plus.
    pub fn diam(&self) -> f64 {
        self.terms.iter().map(FiniteMMSpace::diam).sum()
    }

    /// Number of points of the denoted space (saturating).
    pub fn size_points(&self) -> u128 {
        self.terms
            .iter()
            .fold(1u128, |acc, t| acc.saturating_mul(t.n() as u128))
    }

    /// Rescale the denoted space: scaling distributes over box-plus.
    pub fn scale(&self, a: f64) -> Result<BoxSum> {
        let terms = self
            .terms
            .iter()
            .map(|t| t.scale(a))
            .collect::<Result<Vec<_>>>()?;
        Ok(BoxSum { terms })
    }

    /// Box-plus of two combinations: concatenation of the term lists.
    pub fn boxplus(mut self, mut other: BoxSum) -> BoxSum {
        self.terms.append(&mut other.terms);
        self
    }

    /// Fold the terms into an actual space, subject to the size budget.
    pub fn materialize(&self, budget: usize) -> Result<FiniteMMSpace> {
        let required = self.size_points();
        if required > budget as u128 {
            return Err(Error::SizeOverflow { required, budget });
        }
        let mut acc = FiniteMMSpace::trivial();
        for t in &self.terms {
            acc = acc.boxplus_budget(t, budget)?;
        }
        Ok(acc)
    }
}
