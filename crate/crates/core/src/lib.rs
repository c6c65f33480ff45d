//! Numerical machinery for homogenization on scaling group actions.
//!
//! The crate covers ordered groups of reals acting on `R^N`, homogeneous
//! measures for those actions, mean values obtained as weak-* limits of
//! `u(H_eps(x))`, finite spectral homogenization algebras, and
//! sigma-convergence of oscillating traces `u0(x, H_eps(x))`. Every identity
//! is checked by quadrature against closed forms at desk scale.

pub mod action;
pub mod algebra;
pub mod contraction;
pub mod error;
pub mod homogenizer;
pub mod linalg;
pub mod meanvalue;
pub mod quadrature;
pub mod rgroup;
pub mod sampling;
pub mod sigma;
pub mod testfn;
pub mod trig;

pub use error::{Error, Result};
pub use num_complex::Complex64;
