//! Seeded generators of random spaces and semicharacter specifications,
//! used by tests and property sweeps. All generators take a caller-owned RNG
//! so sweeps are reproducible.

use crate::functionals::Semicharacter;
use crate::space::FiniteMMSpace;
use rand::Rng;

/// Random normalized weight vector with entries bounded away from zero
/// (each in [0.5, 1.5) before normalization).
pub fn random_weights(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| 0.5 + rng.gen::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

/// A space whose off-diagonal distances lie in `[base, 2 base)`: the
/// triangle inequality holds automatically, distances are generic (no exact
/// colinearities), weights are random with full support.
pub fn band_space(rng: &mut impl Rng, n: usize, base: f64) -> FiniteMMSpace {
    assert!(n >= 1 && base > 0.0);
    let mut rows = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = base * (1.0 + rng.gen::<f64>());
            rows[i][j] = d;
            rows[j][i] = d;
        }
    }
    FiniteMMSpace::new(rows, random_weights(rng, n)).expect("band construction is always valid")
}

/// A star (tree) metric: point `i` sits at radius `r_i > 0` from a common
/// hub, so `d(i, j) = r_i + r_j`. Every triple is colinear through the
/// sumset structure, making these adversarial for grid searches.
pub fn star_space(rng: &mut impl Rng, n: usize, base: f64) -> FiniteMMSpace {
    assert!(n >= 1 && base > 0.0);
    let radii: Vec<f64> = (0..n).map(|_| base * (0.5 + rng.gen::<f64>())).collect();
    let mut rows = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = radii[i] + radii[j];
            rows[i][j] = d;
            rows[j][i] = d;
        }
    }
    FiniteMMSpace::new(rows, random_weights(rng, n)).expect("star construction is always valid")
}

/// A generic random space with 1 to `max_n` points (unit distance band).
pub fn random_space(rng: &mut impl Rng, max_n: usize) -> FiniteMMSpace {
    let n = 1 + (rng.gen::<u64>() as usize) % max_n;
    if n == 1 {
        return FiniteMMSpace::trivial();
    }
    let scale = 0.5 + rng.gen::<f64>();
    band_space(rng, n, scale)
}

/// A random semicharacter specification of the given order: each pair is
/// included with probability 0.6 with a coefficient in (0, 2); at least one
/// pair is always present.
pub fn random_semicharacter(rng: &mut impl Rng, order: usize) -> Semicharacter {
    assert!(order >= 2);
    let mut entries = Vec::new();
    for i in 0..order {
        for j in (i + 1)..order {
            if rng.gen::<f64>() < 0.6 {
                entries.push((i, j, 0.05 + 1.95 * rng.gen::<f64>()));
            }
        }
    }
    if entries.is_empty() {
        entries.push((0, 1, 0.05 + 1.95 * rng.gen::<f64>()));
    }
    Semicharacter::new(order, entries).expect("generated entries are always valid")
}

/// A random product of two generic factors (2 to `max_factor` points each),
/// returned with its factors.
pub fn random_product(
    rng: &mut impl Rng,
    max_factor: usize,
) -> (FiniteMMSpace, FiniteMMSpace, FiniteMMSpace) {
    let ny = 2 + (rng.gen::<u64>() as usize) % (max_factor - 1);
    let nz = 2 + (rng.gen::<u64>() as usize) % (max_factor - 1);
    let scale_y = 0.5 + rng.gen::<f64>();
    let scale_z = 0.5 + rng.gen::<f64>();
    let y = band_space(rng, ny, scale_y);
    let z = band_space(rng, nz, scale_z);
    let x = y.boxplus(&z).expect("small products fit the budget");
    (x, y, z)
}
