//! Deterministic point sets used by the sampled certificates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Seeded generator shared by every randomized check.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Van der Corput radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while index > 0 {
        out += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    out
}

/// `i`-th Halton point in `[0,1)^dim` (skipping the origin).
pub fn halton(i: usize, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|d| radical_inverse(i as u64 + 1, PRIMES[d % PRIMES.len()]))
        .collect()
}

/// Deterministic unit directions in `R^dim`.
///
/// One dimension gives `{-1, +1}`, two dimensions equally spaced angles, and
/// higher dimensions Halton points pushed through Box-Muller and normalized.
pub fn sphere_directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    match dim {
        0 => Vec::new(),
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count.max(4))
            .map(|j| {
                let t = std::f64::consts::TAU * j as f64 / count.max(4) as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            let pairs = dim.div_ceil(2);
            let mut out = Vec::with_capacity(count);
            for i in 0..count {
                let u = halton(i, 2 * pairs);
                let mut v = Vec::with_capacity(dim);
                for p in 0..pairs {
                    let u1 = u[2 * p].max(1e-12);
                    let u2 = u[2 * p + 1];
                    let rad = (-2.0 * u1.ln()).sqrt();
                    let ang = std::f64::consts::TAU * u2;
                    v.push(rad * ang.cos());
                    v.push(rad * ang.sin());
                }
                v.truncate(dim);
                let n = crate::linalg::norm(&v);
                if n > 1e-12 {
                    out.push(v.into_iter().map(|c| c / n).collect());
                }
            }
            out
        }
    }
}
