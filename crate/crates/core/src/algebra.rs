//! Homogenization algebras in spectral form: elements are finite sums
//! `sum_z c_z exp(2 pi i (sum_j z_j g_j).y)` over integer multi-indices `z`
//! relative to fixed generator frequencies `g_j`.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::trig::{TrigPolynomial, SPECTRUM_TOL};

pub const DEFAULT_DEGREE: u32 = 8;
/// Nonzero integer combinations of generators must stay this far from 0.
pub const INDEPENDENCE_TOL: f64 = 1e-9;
const MAX_INDEPENDENCE_CHECKS: usize = 2_000_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum AlgebraKind {
    /// Continuous `Z^N`-periodic functions (cell `(0,1)^N`).
    Periodic,
    /// Almost periodic functions with spectrum in the group generated by the
    /// generators, truncated at `|z_j| <= degree`.
    ApSubgroup { degree: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HAlgebra {
    pub kind: AlgebraKind,
    pub dim: usize,
    pub generators: Vec<Vec<f64>>,
}

impl HAlgebra {
    pub fn periodic(dim: usize) -> Arc<Self> {
        let generators = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Arc::new(HAlgebra {
            kind: AlgebraKind::Periodic,
            dim,
            generators,
        })
    }

    /// Checks that no nonzero combination with `|z_j| <= 2 degree` vanishes,
    /// so that multi-indices up to the degree name distinct frequencies.
    pub fn ap_subgroup(generators: Vec<Vec<f64>>, degree: u32) -> Result<Arc<Self>> {
        let dim = generators.first().map_or(0, |g| g.len());
        if generators.is_empty() || dim == 0 {
            return Err(Error::InvalidParameter("need at least one generator".into()));
        }
        if let Some(g) = generators.iter().find(|g| g.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: g.len(),
            });
        }
        if degree == 0 {
            return Err(Error::InvalidParameter("truncation degree must be >= 1".into()));
        }
        let alg = HAlgebra {
            kind: AlgebraKind::ApSubgroup { degree },
            dim,
            generators,
        };
        let bound = 2 * degree as i64;
        let count = (2 * bound as usize + 1).checked_pow(alg.generators.len() as u32);
        if count.is_some_and(|c| c <= MAX_INDEPENDENCE_CHECKS) {
            for z in multi_indices(alg.generators.len(), bound) {
                if z.iter().any(|&v| v != 0) {
                    let f = alg.frequency(&z);
                    if f.iter().all(|v| v.abs() <= INDEPENDENCE_TOL) {
                        return Err(Error::InvalidParameter(format!(
                            "generators are dependent: {z:?} combines to zero"
                        )));
                    }
                }
            }
        }
        Ok(Arc::new(alg))
    }

    pub fn degree(&self) -> Option<u32> {
        match self.kind {
            AlgebraKind::Periodic => None,
            AlgebraKind::ApSubgroup { degree } => Some(degree),
        }
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    /// `sum_j z_j g_j`.
    pub fn frequency(&self, z: &[i64]) -> Vec<f64> {
        let mut f = vec![0.0; self.dim];
        for (zj, g) in z.iter().zip(&self.generators) {
            for (fi, gi) in f.iter_mut().zip(g) {
                *fi += *zj as f64 * gi;
            }
        }
        f
    }

    fn check_index(&self, z: &[i64]) -> Result<()> {
        if let Some(d) = self.degree() {
            if z.iter().any(|v| v.unsigned_abs() > d as u64) {
                return Err(Error::TruncationOverflow {
                    index: z.to_vec(),
                    degree: d,
                });
            }
        }
        Ok(())
    }

    /// Multi-index of an admissible frequency.
    pub fn index_of(&self, freq: &[f64]) -> Result<Vec<i64>> {
        if freq.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: freq.len(),
            });
        }
        match self.kind {
            AlgebraKind::Periodic => {
                if freq.iter().any(|k| (k - k.round()).abs() > crate::trig::FREQ_TOL) {
                    return Err(Error::InvalidParameter(format!(
                        "frequency {freq:?} is not an integer vector"
                    )));
                }
                Ok(freq.iter().map(|k| k.round() as i64).collect())
            }
            AlgebraKind::ApSubgroup { degree } => multi_indices(self.rank(), degree as i64)
                .find(|z| {
                    self.frequency(z)
                        .iter()
                        .zip(freq)
                        .all(|(a, b)| (a - b).abs() <= crate::trig::FREQ_TOL * (1.0 + b.abs()))
                })
                .ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "frequency {freq:?} is outside the truncated subgroup"
                    ))
                }),
        }
    }

    pub fn is_admissible(&self, freq: &[f64]) -> bool {
        self.index_of(freq).is_ok()
    }
}

/// All `z` in `[-bound, bound]^m`, lexicographic.
fn multi_indices(m: usize, bound: i64) -> impl Iterator<Item = Vec<i64>> {
    let side = (2 * bound + 1) as usize;
    let total = side.pow(m as u32);
    (0..total).map(move |mut flat| {
        let mut z = vec![0i64; m];
        for zj in z.iter_mut().rev() {
            *zj = (flat % side) as i64 - bound;
            flat /= side;
        }
        z
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement {
    algebra: Arc<HAlgebra>,
    coeffs: BTreeMap<Vec<i64>, Complex64>,
}

impl AlgebraElement {
    pub fn from_indices(
        algebra: &Arc<HAlgebra>,
        terms: impl IntoIterator<Item = (Vec<i64>, Complex64)>,
    ) -> Result<Self> {
        let mut coeffs = BTreeMap::new();
        for (z, c) in terms {
            if z.len() != algebra.rank() {
                return Err(Error::DimensionMismatch {
                    expected: algebra.rank(),
                    got: z.len(),
                });
            }
            algebra.check_index(&z)?;
            *coeffs.entry(z).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        Ok(AlgebraElement {
            algebra: algebra.clone(),
            coeffs,
        })
    }

    pub fn from_trig(algebra: &Arc<HAlgebra>, t: &TrigPolynomial) -> Result<Self> {
        let terms = t
            .terms()
            .iter()
            .map(|term| Ok((algebra.index_of(&term.freq)?, term.coeff)))
            .collect::<Result<Vec<_>>>()?;
        AlgebraElement::from_indices(algebra, terms)
    }

    pub fn constant(algebra: &Arc<HAlgebra>, c: Complex64) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(vec![0; algebra.rank()], c);
        AlgebraElement {
            algebra: algebra.clone(),
            coeffs,
        }
    }

    pub fn algebra(&self) -> &Arc<HAlgebra> {
        &self.algebra
    }

    pub fn coefficients(&self) -> &BTreeMap<Vec<i64>, Complex64> {
        &self.coeffs
    }

    pub fn to_trig(&self) -> TrigPolynomial {
        TrigPolynomial::new(
            self.algebra.dim,
            self.coeffs.iter().map(|(z, c)| (self.algebra.frequency(z), *c)),
        )
        .expect("admissible frequencies have the algebra dimension")
    }

    /// Frequencies with their coefficients, in index order.
    pub fn terms(&self) -> Vec<(Vec<f64>, Complex64)> {
        self.coeffs
            .iter()
            .map(|(z, c)| (self.algebra.frequency(z), *c))
            .collect()
    }

    pub fn eval(&self, y: &[f64]) -> Complex64 {
        self.coeffs
            .iter()
            .map(|(z, c)| {
                let f = self.algebra.frequency(z);
                let phase: f64 = f.iter().zip(y).map(|(a, b)| a * b).sum();
                c * Complex64::from_polar(1.0, TAU * phase)
            })
            .sum()
    }

    /// Value at the torus point `theta` (one angle per generator, in turns).
    pub fn eval_torus(&self, theta: &[f64]) -> Complex64 {
        self.coeffs
            .iter()
            .map(|(z, c)| {
                let phase: f64 = z.iter().zip(theta).map(|(a, b)| *a as f64 * b).sum();
                c * Complex64::from_polar(1.0, TAU * phase)
            })
            .sum()
    }

    /// True when no index beyond zero has a nonzero coefficient.
    pub fn is_constant(&self) -> bool {
        self.coeffs
            .iter()
            .all(|(z, c)| z.iter().all(|v| *v == 0) || c.norm() == 0.0)
    }

    fn same_algebra(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.algebra, &other.algebra) || self.algebra == other.algebra {
            Ok(())
        } else {
            Err(Error::AlgebraMismatch)
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_algebra(other)?;
        let mut coeffs = self.coeffs.clone();
        for (z, c) in &other.coeffs {
            *coeffs.entry(z.clone()).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        Ok(AlgebraElement {
            algebra: self.algebra.clone(),
            coeffs,
        })
    }

    pub fn scale(&self, a: Complex64) -> Self {
        AlgebraElement {
            algebra: self.algebra.clone(),
            coeffs: self.coeffs.iter().map(|(z, c)| (z.clone(), c * a)).collect(),
        }
    }
}

/// Coefficient convolution `(uv)_k = sum_{k1 + k2 = k} u_k1 v_k2`.
pub fn multiply(u: &AlgebraElement, v: &AlgebraElement) -> Result<AlgebraElement> {
    u.same_algebra(v)?;
    let mut coeffs: BTreeMap<Vec<i64>, Complex64> = BTreeMap::new();
    for (a, ca) in &u.coeffs {
        for (b, cb) in &v.coeffs {
            let z: Vec<i64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
            u.algebra.check_index(&z)?;
            *coeffs.entry(z).or_insert(Complex64::new(0.0, 0.0)) += ca * cb;
        }
    }
    Ok(AlgebraElement {
        algebra: u.algebra.clone(),
        coeffs,
    })
}

/// Integral of the Gelfand transform against the M-measure: the zero
/// coefficient.
pub fn gelfand_mean(u: &AlgebraElement) -> Complex64 {
    u.coeffs
        .get(&vec![0; u.algebra.rank()])
        .copied()
        .unwrap_or(Complex64::new(0.0, 0.0))
}

/// Frequencies whose coefficient exceeds [`SPECTRUM_TOL`] in magnitude.
pub fn spectrum_of(u: &AlgebraElement) -> Vec<Vec<f64>> {
    u.coeffs
        .iter()
        .filter(|(_, c)| c.norm() > SPECTRUM_TOL)
        .map(|(z, _)| u.algebra.frequency(z))
        .collect()
}

/// `sum_k u_k v_{-k}`, summed in the index order of `u`.
pub fn beta_pairing(u: &AlgebraElement, v: &AlgebraElement) -> Result<Complex64> {
    u.same_algebra(v)?;
    let mut total = Complex64::new(0.0, 0.0);
    for (z, c) in &u.coeffs {
        let neg: Vec<i64> = z.iter().map(|v| -v).collect();
        if let Some(d) = v.coeffs.get(&neg) {
            total += c * d;
        }
    }
    Ok(total)
}

pub fn conjugate(u: &AlgebraElement) -> AlgebraElement {
    AlgebraElement {
        algebra: u.algebra.clone(),
        coeffs: u
            .coeffs
            .iter()
            .map(|(z, c)| (z.iter().map(|v| -v).collect(), c.conj()))
            .collect(),
    }
}

/// Dense sample of the generator torus: `side^m` points, `side` chosen so
/// the total stays near `budget` (at least 8 per axis).
pub fn torus_samples(rank: usize, budget: usize) -> Vec<Vec<f64>> {
    let side = ((budget as f64).powf(1.0 / rank.max(1) as f64).floor() as usize).max(8);
    let total = side.pow(rank as u32);
    (0..total)
        .map(|mut flat| {
            let mut t = vec![0.0; rank];
            for tj in t.iter_mut().rev() {
                *tj = (flat % side) as f64 / side as f64;
                flat /= side;
            }
            t
        })
        .collect()
}

/// Certifies `u >= 0` on a dense torus sample (imaginary parts at most
/// `1e-12`).
pub fn sampled_nonnegative(u: &AlgebraElement) -> bool {
    torus_samples(u.algebra.rank(), 4096).iter().all(|t| {
        let v = u.eval_torus(t);
        v.re >= -1e-12 && v.im.abs() <= 1e-12
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn periodic_elem(terms: &[(i64, f64)]) -> AlgebraElement {
        AlgebraElement::from_indices(&HAlgebra::periodic(1), terms.iter().map(|(k, v)| (vec![*k], c(*v)))).unwrap()
    }

    #[test]
    fn multiplication_examples() {
        let u = periodic_elem(&[(1, 1.0)]);
        let v = periodic_elem(&[(-1, 1.0)]);
        assert_eq!(multiply(&u, &v).unwrap(), periodic_elem(&[(0, 1.0)]));
        let one = periodic_elem(&[(0, 1.0)]);
        assert_eq!(multiply(&u, &one).unwrap(), u);
        let w = periodic_elem(&[(0, 1.0), (1, 1.0)]);
        assert_eq!(multiply(&w, &w).unwrap(), periodic_elem(&[(0, 1.0), (1, 2.0), (2, 1.0)]));
    }

    #[test]
    fn means_and_spectra() {
        assert_eq!(gelfand_mean(&periodic_elem(&[(0, 5.0)])), c(5.0));
        assert_eq!(gelfand_mean(&periodic_elem(&[(0, 2.0), (1, 3.0), (-1, 3.0)])), c(2.0));
        let ap = HAlgebra::ap_subgroup(vec![vec![2f64.sqrt()]], DEFAULT_DEGREE).unwrap();
        let chi = AlgebraElement::from_trig(&ap, &TrigPolynomial::character(vec![2f64.sqrt()], c(1.0))).unwrap();
        assert_eq!(gelfand_mean(&chi), c(0.0));
        // sin(2 pi x) = (e(x) - e(-x)) / 2i
        let s = AlgebraElement::from_indices(
            &HAlgebra::periodic(1),
            [(vec![1], Complex64::new(0.0, -0.5)), (vec![-1], Complex64::new(0.0, 0.5)), (vec![4], c(0.0))],
        )
        .unwrap();
        assert_eq!(spectrum_of(&s), vec![vec![-1.0], vec![1.0]]);
        assert_eq!(spectrum_of(&periodic_elem(&[(0, 1.0)])), vec![vec![0.0]]);
    }

    #[test]
    fn beta_examples() {
        let u = periodic_elem(&[(1, 1.0)]);
        assert_eq!(beta_pairing(&u, &u).unwrap(), c(0.0));
        assert_eq!(beta_pairing(&u, &periodic_elem(&[(-1, 1.0)])).unwrap(), c(1.0));
        assert_eq!(beta_pairing(&periodic_elem(&[(0, 2.0)]), &periodic_elem(&[(0, 3.0)])).unwrap(), c(6.0));
    }

    #[test]
    fn truncation_and_dependence() {
        let ap = HAlgebra::ap_subgroup(vec![vec![1.0], vec![2f64.sqrt()]], 2).unwrap();
        let u = AlgebraElement::from_indices(&ap, [(vec![2, 0], c(1.0))]).unwrap();
        assert!(matches!(multiply(&u, &u), Err(Error::TruncationOverflow { .. })));
        assert!(AlgebraElement::from_indices(&ap, [(vec![3, 0], c(1.0))]).is_err());
        assert!(HAlgebra::ap_subgroup(vec![vec![1.0], vec![0.5]], 2).is_err());
        assert!(ap.is_admissible(&[1.0 + 2f64.sqrt()]));
        assert!(!ap.is_admissible(&[0.5]));
        let other = HAlgebra::periodic(1);
        let v = AlgebraElement::constant(&other, c(1.0));
        assert!(matches!(multiply(&u, &v), Err(Error::AlgebraMismatch)));
    }

    #[test]
    fn evaluation_matches_trig_form() {
        let ap = HAlgebra::ap_subgroup(vec![vec![1.0], vec![2f64.sqrt()]], DEFAULT_DEGREE).unwrap();
        let u = AlgebraElement::from_indices(
            &ap,
            [(vec![1, 0], Complex64::new(0.5, 0.2)), (vec![0, -1], c(1.5)), (vec![0, 0], c(-0.3))],
        )
        .unwrap();
        let t = u.to_trig();
        for y in [0.0, 0.31, 2.7] {
            assert!((u.eval(&[y]) - t.eval(&[y])).norm() < 1e-14);
            assert!((u.eval_torus(&[y, 2f64.sqrt() * y]) - t.eval(&[y])).norm() < 1e-12);
        }
        assert_eq!(AlgebraElement::from_trig(&ap, &t).unwrap(), u);
    }

    #[test]
    fn nonnegativity_on_samples() {
        // |1 + e(x)|^2 = 2 + e(x) + e(-x)
        let u = periodic_elem(&[(0, 2.0), (1, 1.0), (-1, 1.0)]);
        assert!(sampled_nonnegative(&u));
        assert!(!sampled_nonnegative(&periodic_elem(&[(1, 1.0), (-1, 1.0)])));
    }
}
