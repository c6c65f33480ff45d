//! Mean values of periodic, vanishing-at-infinity and almost periodic
//! functions, their empirical verification along an epsilon ladder, the
//! Xi^p seminorm, and translation and convolution invariance on `R^N`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::action::{Action, Ball};
use crate::error::{Error, Result};
use crate::homogenizer::Homogenizer;
use crate::linalg::distance;
use crate::quadrature::{integrate_box, tensor_rule, Aabb, QuadratureGrid, Rule};
use crate::rgroup::{GroupElement, RGroup};
use crate::testfn::Integrand;
use crate::trig::TrigPolynomial;

/// Errors at or below this are treated as exact and left out of rate fits.
pub const EXACT_FLOOR: f64 = 1e-14;
/// Number of trailing ladder points used by the rate fit.
pub const FIT_POINTS: usize = 6;
/// Allowed growth between consecutive ladder errors before the sequence
/// counts as non-monotone.
pub const MONOTONE_SLACK: f64 = 0.1;

pub type Func = Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>;

#[derive(Clone)]
pub enum MeanFunction {
    /// `Z^N`-periodic with cell `(0,1)^N`; a trigonometric representation
    /// (integer frequencies) is used when present.
    Periodic {
        label: String,
        dim: usize,
        func: Func,
        trig: Option<TrigPolynomial>,
    },
    /// Tends to `xi` at infinity.
    Vanishing {
        label: String,
        dim: usize,
        func: Func,
        xi: Complex64,
    },
    AlmostPeriodic { label: String, trig: TrigPolynomial },
}

impl fmt::Debug for MeanFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.class_name(), self.label())
    }
}

impl MeanFunction {
    pub fn periodic(
        label: impl Into<String>,
        dim: usize,
        func: impl Fn(&[f64]) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        MeanFunction::Periodic {
            label: label.into(),
            dim,
            func: Arc::new(func),
            trig: None,
        }
    }

    pub fn periodic_trig(label: impl Into<String>, trig: TrigPolynomial) -> Result<Self> {
        if !trig.has_integer_frequencies() {
            return Err(Error::InvalidParameter(
                "periodic functions need integer frequencies".into(),
            ));
        }
        let t = trig.clone();
        Ok(MeanFunction::Periodic {
            label: label.into(),
            dim: trig.dim(),
            func: Arc::new(move |x| t.eval(x)),
            trig: Some(trig),
        })
    }

    pub fn vanishing(
        label: impl Into<String>,
        dim: usize,
        xi: Complex64,
        func: impl Fn(&[f64]) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        MeanFunction::Vanishing {
            label: label.into(),
            dim,
            func: Arc::new(func),
            xi,
        }
    }

    pub fn almost_periodic(label: impl Into<String>, trig: TrigPolynomial) -> Self {
        MeanFunction::AlmostPeriodic {
            label: label.into(),
            trig,
        }
    }

    pub fn constant(dim: usize, c: Complex64) -> Self {
        MeanFunction::almost_periodic(format!("{c}"), TrigPolynomial::constant(dim, c))
    }

    /// `sin^2(2 pi y)` in its trigonometric form.
    pub fn sin_squared() -> Self {
        let t = TrigPolynomial::new(
            1,
            [
                (vec![0.0], Complex64::new(0.5, 0.0)),
                (vec![2.0], Complex64::new(-0.25, 0.0)),
                (vec![-2.0], Complex64::new(-0.25, 0.0)),
            ],
        )
        .expect("valid terms");
        MeanFunction::periodic_trig("sin^2(2 pi y)", t).expect("integer frequencies")
    }

    pub fn class_name(&self) -> &'static str {
        match self {
            MeanFunction::Periodic { .. } => "periodic",
            MeanFunction::Vanishing { .. } => "vanishing-at-infinity",
            MeanFunction::AlmostPeriodic { .. } => "almost-periodic",
        }
    }

    pub fn label(&self) -> &str {
        match self {
            MeanFunction::Periodic { label, .. }
            | MeanFunction::Vanishing { label, .. }
            | MeanFunction::AlmostPeriodic { label, .. } => label,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            MeanFunction::Periodic { dim, .. } | MeanFunction::Vanishing { dim, .. } => *dim,
            MeanFunction::AlmostPeriodic { trig, .. } => trig.dim(),
        }
    }

    pub fn trig(&self) -> Option<&TrigPolynomial> {
        match self {
            MeanFunction::Periodic { trig, .. } => trig.as_ref(),
            MeanFunction::AlmostPeriodic { trig, .. } => Some(trig),
            MeanFunction::Vanishing { .. } => None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        match self {
            MeanFunction::Periodic { func, .. } | MeanFunction::Vanishing { func, .. } => func(x),
            MeanFunction::AlmostPeriodic { trig, .. } => trig.eval(x),
        }
    }

    fn evaluator(&self) -> Func {
        match self {
            MeanFunction::Periodic { func, .. } | MeanFunction::Vanishing { func, .. } => {
                func.clone()
            }
            MeanFunction::AlmostPeriodic { trig, .. } => {
                let t = trig.clone();
                Arc::new(move |x| t.eval(x))
            }
        }
    }

    /// `x -> u(x - a)`.
    pub fn shifted(&self, a: &[f64]) -> MeanFunction {
        let label = format!("{}(. - {:?})", self.label(), a);
        match self {
            MeanFunction::Periodic {
                dim,
                func,
                trig: Some(t),
                ..
            } => MeanFunction::Periodic {
                label,
                dim: *dim,
                func: shift_fn(func.clone(), a),
                trig: Some(t.shifted(a)),
            },
            MeanFunction::Periodic { dim, func, .. } => MeanFunction::Periodic {
                label,
                dim: *dim,
                func: shift_fn(func.clone(), a),
                trig: None,
            },
            MeanFunction::Vanishing { dim, func, xi, .. } => MeanFunction::Vanishing {
                label,
                dim: *dim,
                func: shift_fn(func.clone(), a),
                xi: *xi,
            },
            MeanFunction::AlmostPeriodic { trig, .. } => MeanFunction::AlmostPeriodic {
                label,
                trig: trig.shifted(a),
            },
        }
    }

    /// Checks the class invariant on deterministic samples: periodicity
    /// under integer shifts, or decay of `|u - xi|` along rays.
    pub fn check_class(&self) -> bool {
        let n = self.dim();
        let points: Vec<Vec<f64>> = (0..32)
            .map(|i| crate::sampling::halton(i, n).iter().map(|v| 4.0 * v - 2.0).collect())
            .collect();
        match self {
            MeanFunction::Periodic { .. } => points.iter().all(|x| {
                (0..n).all(|axis| {
                    [-3.0, 1.0, 7.0].iter().all(|k| {
                        let mut y = x.clone();
                        y[axis] += k;
                        (self.eval(&y) - self.eval(x)).norm() <= 1e-12 * (1.0 + self.eval(x).norm())
                    })
                })
            }),
            MeanFunction::Vanishing { xi, .. } => points.iter().all(|x| {
                let gaps: Vec<f64> = [1e1, 1e3, 1e5]
                    .iter()
                    .map(|s| (self.eval(&x.iter().map(|v| (v + 0.1) * s).collect::<Vec<_>>()) - xi).norm())
                    .collect();
                gaps[2] <= gaps[0] && gaps[2] < 1e-3
            }),
            MeanFunction::AlmostPeriodic { .. } => true,
        }
    }
}

fn shift_fn(f: Func, a: &[f64]) -> Func {
    let a = a.to_vec();
    Arc::new(move |x: &[f64]| {
        let y: Vec<f64> = x.iter().zip(&a).map(|(x, a)| x - a).collect();
        f(&y)
    })
}

/// Cell grid for periodic means: about `2^20` midpoint nodes in total.
pub fn cell_grid(dim: usize) -> QuadratureGrid {
    let per_axis = (1usize << (20 / dim.max(1))).clamp(8, 1024);
    QuadratureGrid::new(vec![per_axis], Rule::Midpoint)
}

/// Closed-form mean value of `u`.
pub fn mean(u: &MeanFunction) -> Result<Complex64> {
    match u {
        MeanFunction::Periodic { trig: Some(t), .. } => Ok(t.zero_coefficient()),
        MeanFunction::Periodic { dim, func, .. } => {
            let cell = Aabb::new(vec![0.0; *dim], vec![1.0; *dim]);
            Ok(integrate_box(&**func, &cell, &cell_grid(*dim))?.value)
        }
        MeanFunction::Vanishing { xi, .. } => Ok(*xi),
        MeanFunction::AlmostPeriodic { trig, .. } => Ok(trig.zero_coefficient()),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub eps: GroupElement,
    /// `int phi(x) u(H_eps x) d lambda / int phi d lambda`.
    pub value: Complex64,
    pub error: f64,
    /// Refinement estimate of `value`.
    pub quad_err: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub label: String,
    pub target: Complex64,
    pub normalization: Complex64,
    pub rows: Vec<ConvergenceRow>,
    /// `None` when too few errors are above [`EXACT_FLOOR`] to fit.
    pub order: Option<f64>,
    pub final_error: f64,
    pub monotone: bool,
}

impl ConvergenceReport {
    pub fn final_value(&self) -> Complex64 {
        self.rows.last().map_or(Complex64::new(0.0, 0.0), |r| r.value)
    }

    /// Final error within `tol` and, when a rate exists, at least `min_order`.
    pub fn passes(&self, tol: f64, min_order: f64) -> bool {
        self.final_error <= tol && self.order.is_none_or(|p| p >= min_order)
    }
}

/// Least-squares slope of `ln(error)` against the Haar coordinate of `eps`
/// over the last [`FIT_POINTS`] entries, skipping errors at or below
/// [`EXACT_FLOOR`]. For the multiplicative group this is the exponent `p`
/// in `error ~ eps^p`.
pub fn fit_decay_order(group: &RGroup, eps: &[GroupElement], errors: &[f64]) -> Option<f64> {
    let start = eps.len().saturating_sub(FIT_POINTS);
    let pts: Vec<(f64, f64)> = eps[start..]
        .iter()
        .zip(&errors[start..])
        .filter(|(_, e)| **e > EXACT_FLOOR && e.is_finite())
        .map(|(g, e)| (group.haar_coordinate(*g), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn linear_map(action: &Action, eps: GroupElement) -> Result<impl Fn(&[f64], &mut [f64]) + Send + Sync> {
    let b = action.matrix(eps)?;
    let n = b.nrows();
    let rows: Vec<f64> = b.transpose().as_slice().to_vec();
    Ok(move |x: &[f64], y: &mut [f64]| {
        for (i, yi) in y.iter_mut().enumerate().take(n) {
            *yi = rows[i * n..(i + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum();
        }
    })
}

/// `phi(x) g(H_eps x)`, supported where `phi` is.
pub(crate) fn weighted_trace(
    action: &Action,
    eps: GroupElement,
    phi: &Integrand,
    g: Func,
) -> Result<Integrand> {
    let map = linear_map(action, eps)?;
    let n = action.dim();
    let p = phi.clone();
    Ok(Integrand::new(
        format!("{}*u(H({}))", phi.label, eps.0),
        phi.support.clone(),
        move |x| {
            let v = p.eval(x);
            if v == Complex64::new(0.0, 0.0) {
                return v;
            }
            let mut buf = [0.0; 8];
            let mut heap;
            let y: &mut [f64] = if n <= 8 {
                &mut buf[..n]
            } else {
                heap = vec![0.0; n];
                &mut heap
            };
            map(x, y);
            v * g(y)
        },
    ))
}

fn convergence_rows(
    hz: &Homogenizer,
    phi: &Integrand,
    g: Func,
    target: Complex64,
    ladder: &[GroupElement],
    grid: &QuadratureGrid,
) -> Result<(Complex64, Vec<ConvergenceRow>)> {
    let base = hz.integrate(phi, grid)?;
    if base.value.norm() == 0.0 {
        return Err(Error::Precondition("the test function integrates to zero".into()));
    }
    let rows = ladder
        .par_iter()
        .map(|&eps| {
            let f = weighted_trace(&hz.action, eps, phi, g.clone())?;
            let q = hz.measure.integrate(&f, grid)?;
            let value = q.value / base.value;
            Ok(ConvergenceRow {
                eps,
                value,
                error: (value - target).norm(),
                quad_err: (q.error + value.norm() * base.error) / base.value.norm(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((base.value, rows))
}

fn report(
    label: String,
    hz: &Homogenizer,
    target: Complex64,
    normalization: Complex64,
    rows: Vec<ConvergenceRow>,
) -> ConvergenceReport {
    let eps: Vec<GroupElement> = rows.iter().map(|r| r.eps).collect();
    let errors: Vec<f64> = rows.iter().map(|r| r.error).collect();
    let order = fit_decay_order(hz.action.group(), &eps, &errors);
    let monotone = errors
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + MONOTONE_SLACK) || w[1] <= EXACT_FLOOR);
    ConvergenceReport {
        label,
        target,
        normalization,
        final_error: errors.last().copied().unwrap_or(f64::INFINITY),
        order,
        monotone,
        rows,
    }
}

/// Ratios `int phi (u o H_eps) d lambda / int phi d lambda` along `ladder`,
/// compared with [`mean`].
pub fn empirical_mean(
    u: &MeanFunction,
    hz: &Homogenizer,
    phi: &Integrand,
    ladder: &[GroupElement],
    grid: &QuadratureGrid,
) -> Result<ConvergenceReport> {
    check_dims(u, hz, phi)?;
    let target = mean(u)?;
    let (base, rows) = convergence_rows(hz, phi, u.evaluator(), target, ladder, grid)?;
    Ok(report(u.label().to_string(), hz, target, base, rows))
}

fn check_dims(u: &MeanFunction, hz: &Homogenizer, phi: &Integrand) -> Result<()> {
    for d in [u.dim(), phi.dim()] {
        if d != hz.dim() {
            return Err(Error::DimensionMismatch {
                expected: hz.dim(),
                got: d,
            });
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct XiReport {
    pub p: f64,
    pub ball: Ball,
    pub values: Vec<(GroupElement, f64)>,
    /// Maximum over the sampled `eps`; a lower bound for the supremum.
    pub sup: f64,
}

/// `max_eps (int_{B} |u(H_eps x)|^p d lambda)^{1/p}` over `eps_samples`.
pub fn xi_p_seminorm(
    u: &MeanFunction,
    hz: &Homogenizer,
    p: f64,
    ball: &Ball,
    eps_samples: &[GroupElement],
    grid: &QuadratureGrid,
) -> Result<XiReport> {
    if p < 1.0 || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("p = {p} must be in [1, inf)")));
    }
    let g = hz.action.group();
    let e = g.identity();
    if let Some(bad) = eps_samples.iter().find(|x| g.compare(**x, e).is_gt()) {
        return Err(Error::InvalidParameter(format!(
            "sample {} lies above the identity",
            bad.0
        )));
    }
    if distance(&ball.center, &hz.action.center()) > crate::action::CENTER_TOL {
        return Err(Error::Precondition("the ball must be centered at the action center".into()));
    }
    let dim = hz.dim();
    let b = ball.clone();
    let indicator = Integrand::new("ball", Aabb::cube(&ball.center, ball.radius), move |x| {
        if dim == 1 || distance(x, &b.center) < b.radius {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let ev = u.evaluator();
    let power: Func = Arc::new(move |y| Complex64::new(ev(y).norm().powf(p), 0.0));
    let values = eps_samples
        .par_iter()
        .map(|&eps| {
            let f = weighted_trace(&hz.action, eps, &indicator, power.clone())?;
            let q = hz.measure.integrate_with(&f, grid, false)?;
            Ok((eps, q.value.re.max(0.0).powf(1.0 / p)))
        })
        .collect::<Result<Vec<_>>>()?;
    let sup = values.iter().map(|v| v.1).fold(0.0, f64::max);
    Ok(XiReport {
        p,
        ball: ball.clone(),
        values,
        sup,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TranslationReport {
    pub shift: Vec<f64>,
    pub original: ConvergenceReport,
    pub shifted: ConvergenceReport,
    /// `|mean(u) - mean(tau_a u)|` from the closed forms.
    pub closed_form_gap: f64,
    pub final_gap: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Runs [`empirical_mean`] on `u` and `x -> u(x - a)` and compares.
pub fn verify_translation_invariance(
    u: &MeanFunction,
    hz: &Homogenizer,
    a: &[f64],
    phi: &Integrand,
    ladder: &[GroupElement],
    grid: &QuadratureGrid,
    tol: f64,
) -> Result<TranslationReport> {
    if a.len() != u.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            got: a.len(),
        });
    }
    let shifted_u = u.shifted(a);
    let original = empirical_mean(u, hz, phi, ladder, grid)?;
    let shifted = empirical_mean(&shifted_u, hz, phi, ladder, grid)?;
    let closed_form_gap = (mean(u)? - mean(&shifted_u)?).norm();
    let final_gap = (original.final_value() - shifted.final_value()).norm();
    let pass = original.final_error <= tol && shifted.final_error <= tol && final_gap <= 2.0 * tol;
    Ok(TranslationReport {
        shift: a.to_vec(),
        original,
        shifted,
        closed_form_gap,
        final_gap,
        tol,
        pass,
    })
}

/// `f * u` computed on the trigonometric side when possible, otherwise
/// pointwise with a fixed tensor rule over the support of `f`.
pub fn convolve(f: &Integrand, u: &MeanFunction, grid: &QuadratureGrid) -> Result<(MeanFunction, Complex64)> {
    let mass = integrate_box(f.func(), &f.support, grid)?.value;
    let label = format!("{}*{}", f.label, u.label());
    if let Some(t) = u.trig() {
        let conv = t.map_coefficients(|k| {
            let fk = f.clone();
            let k = k.to_vec();
            let g = move |y: &[f64]| {
                let phase: f64 = k.iter().zip(y).map(|(k, y)| k * y).sum();
                fk.eval(y) * Complex64::from_polar(1.0, -std::f64::consts::TAU * phase)
            };
            integrate_box(&g, &f.support, grid).map_or(Complex64::new(f64::NAN, f64::NAN), |q| q.value)
        });
        if conv.terms().iter().any(|t| !t.coeff.re.is_finite()) {
            return Err(Error::NonFinite { at: f.support.lo.clone() });
        }
        let out = match u {
            MeanFunction::Periodic { .. } => MeanFunction::periodic_trig(label, conv)?,
            _ => MeanFunction::almost_periodic(label, conv),
        };
        return Ok((out, mass));
    }
    let (nodes, weights) = tensor_rule(&f.support, &QuadratureGrid::gauss(32, 8))?;
    let fw: Vec<Complex64> = nodes.iter().zip(&weights).map(|(y, w)| f.eval(y) * *w).collect();
    let ev = u.evaluator();
    let n = u.dim();
    let func = move |x: &[f64]| {
        let mut z = vec![0.0; n];
        nodes
            .iter()
            .zip(&fw)
            .map(|(y, c)| {
                for i in 0..n {
                    z[i] = x[i] - y[i];
                }
                *c * ev(&z)
            })
            .sum::<Complex64>()
    };
    let out = match u {
        MeanFunction::Vanishing { xi, .. } => MeanFunction::vanishing(label, n, xi * mass, func),
        _ => MeanFunction::periodic(label, n, func),
    };
    Ok((out, mass))
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvolutionReport {
    pub f_mass: Complex64,
    pub mean_u: Complex64,
    /// `mean(u) int f`.
    pub predicted: Complex64,
    /// `|mean(f * u) - mean(u) int f|` from the closed forms.
    pub closed_form_gap: f64,
    /// Empirical means of `f * u`, compared against `predicted`.
    pub convolved: ConvergenceReport,
    pub tol: f64,
    pub pass: bool,
}

pub fn verify_convolution(
    f: &Integrand,
    u: &MeanFunction,
    hz: &Homogenizer,
    phi: &Integrand,
    ladder: &[GroupElement],
    grid: &QuadratureGrid,
    tol: f64,
) -> Result<ConvolutionReport> {
    check_dims(u, hz, phi)?;
    let (fu, f_mass) = convolve(f, u, &QuadratureGrid::gauss(64, 8))?;
    let mean_u = mean(u)?;
    let predicted = mean_u * f_mass;
    let closed_form_gap = (mean(&fu)? - predicted).norm();
    let (base, rows) = convergence_rows(hz, phi, fu.evaluator(), predicted, ladder, grid)?;
    let convolved = report(fu.label().to_string(), hz, predicted, base, rows);
    let pass = closed_form_gap <= tol && convolved.final_error <= tol;
    Ok(ConvolutionReport {
        f_mass,
        mean_u,
        predicted,
        closed_form_gap,
        convolved,
        tol,
        pass,
    })
}
