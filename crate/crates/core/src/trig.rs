//! Finite trigonometric polynomials `sum_k c_k exp(2 pi i k.x)` with real
//! frequency vectors.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frequencies closer than this (in every coordinate) are merged.
pub const FREQ_TOL: f64 = 1e-12;
/// Coefficients at or below this magnitude are outside the spectrum.
pub const SPECTRUM_TOL: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub freq: Vec<f64>,
    pub coeff: Complex64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigPolynomial {
    dim: usize,
    terms: Vec<TrigTerm>,
}

fn same_freq(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= FREQ_TOL)
}

impl TrigPolynomial {
    /// Builds a polynomial, summing coefficients of coinciding frequencies.
    /// Terms are kept in first-appearance order.
    pub fn new(dim: usize, terms: impl IntoIterator<Item = (Vec<f64>, Complex64)>) -> Result<Self> {
        let mut out: Vec<TrigTerm> = Vec::new();
        for (freq, coeff) in terms {
            if freq.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: freq.len(),
                });
            }
            if freq.iter().any(|f| !f.is_finite()) || !(coeff.re.is_finite() && coeff.im.is_finite()) {
                return Err(Error::InvalidParameter("non-finite trigonometric term".into()));
            }
            match out.iter_mut().find(|t| same_freq(&t.freq, &freq)) {
                Some(t) => t.coeff += coeff,
                None => out.push(TrigTerm { freq, coeff }),
            }
        }
        Ok(TrigPolynomial { dim, terms: out })
    }

    pub fn constant(dim: usize, c: Complex64) -> Self {
        TrigPolynomial {
            dim,
            terms: vec![TrigTerm {
                freq: vec![0.0; dim],
                coeff: c,
            }],
        }
    }

    /// Single character `c exp(2 pi i k.x)`.
    pub fn character(freq: Vec<f64>, c: Complex64) -> Self {
        TrigPolynomial {
            dim: freq.len(),
            terms: vec![TrigTerm { freq, coeff: c }],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[TrigTerm] {
        &self.terms
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        self.terms
            .iter()
            .map(|t| {
                let phase: f64 = t.freq.iter().zip(x).map(|(k, x)| k * x).sum();
                t.coeff * Complex64::from_polar(1.0, TAU * phase)
            })
            .sum()
    }

    pub fn coefficient(&self, freq: &[f64]) -> Complex64 {
        self.terms
            .iter()
            .find(|t| same_freq(&t.freq, freq))
            .map_or(Complex64::new(0.0, 0.0), |t| t.coeff)
    }

    /// Coefficient of the zero frequency: the Bohr mean.
    pub fn zero_coefficient(&self) -> Complex64 {
        self.coefficient(&vec![0.0; self.dim])
    }

    /// Frequencies with coefficient magnitude above [`SPECTRUM_TOL`].
    pub fn spectrum(&self) -> Vec<Vec<f64>> {
        self.terms
            .iter()
            .filter(|t| t.coeff.norm() > SPECTRUM_TOL)
            .map(|t| t.freq.clone())
            .collect()
    }

    pub fn has_integer_frequencies(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.freq.iter().all(|k| (k - k.round()).abs() <= FREQ_TOL))
    }

    /// Largest `|k_i|` over the terms, per axis.
    pub fn max_frequency(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|i| self.terms.iter().map(|t| t.freq[i].abs()).fold(0.0, f64::max))
            .collect()
    }

    /// `x -> u(x - a)`.
    pub fn shifted(&self, a: &[f64]) -> Self {
        TrigPolynomial {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|t| {
                    let phase: f64 = t.freq.iter().zip(a).map(|(k, a)| k * a).sum();
                    TrigTerm {
                        freq: t.freq.clone(),
                        coeff: t.coeff * Complex64::from_polar(1.0, -TAU * phase),
                    }
                })
                .collect(),
        }
    }

    pub fn conj(&self) -> Self {
        TrigPolynomial {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|t| TrigTerm {
                    freq: t.freq.iter().map(|k| -k).collect(),
                    coeff: t.coeff.conj(),
                })
                .collect(),
        }
    }

    pub fn scale(&self, a: Complex64) -> Self {
        TrigPolynomial {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|t| TrigTerm {
                    freq: t.freq.clone(),
                    coeff: t.coeff * a,
                })
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let all = self.terms.iter().chain(&other.terms).map(|t| (t.freq.clone(), t.coeff));
        TrigPolynomial::new(self.dim, all)
    }

    /// Multiplies each coefficient by `m(k)`.
    pub fn map_coefficients(&self, m: impl Fn(&[f64]) -> Complex64) -> Self {
        TrigPolynomial {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|t| TrigTerm {
                    freq: t.freq.clone(),
                    coeff: t.coeff * m(&t.freq),
                })
                .collect(),
        }
    }

    /// `sum |c_k|`, an upper bound for the sup norm.
    pub fn coefficient_l1(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.norm()).sum()
    }
}
