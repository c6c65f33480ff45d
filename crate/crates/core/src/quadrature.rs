//! Tensor-product quadrature on axis-aligned boxes.
//!
//! Every integral is computed twice, on the requested grid and on the grid
//! with doubled panel counts; the finer value is reported and the difference
//! serves as the refinement error estimate. Sums are accumulated in fixed
//! chunks and combined pairwise, so results do not depend on thread count.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const CHUNK: usize = 4096;

/// Axis-aligned box; bounds may be infinite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Aabb {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len(), "box bounds must share a dimension");
        Aabb { lo, hi }
    }

    pub fn whole(dim: usize) -> Self {
        Aabb {
            lo: vec![f64::NEG_INFINITY; dim],
            hi: vec![f64::INFINITY; dim],
        }
    }

    pub fn cube(center: &[f64], half_width: f64) -> Self {
        Aabb {
            lo: center.iter().map(|c| c - half_width).collect(),
            hi: center.iter().map(|c| c + half_width).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.iter().chain(&self.hi).all(|v| v.is_finite())
    }

    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| l >= h)
    }

    pub fn intersect(&self, other: &Aabb) -> Aabb {
        Aabb {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    /// Euclidean distance from `x` to the box (zero inside).
    pub fn distance_to(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (l, h))| {
                let d = if v < l {
                    l - v
                } else if v > h {
                    v - h
                } else {
                    0.0
                };
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Largest Euclidean norm over the box.
    pub fn max_norm(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| {
                let m = l.abs().max(h.abs());
                m * m
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    pub fn corners(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..1usize << n)
            .map(|mask| {
                (0..n)
                    .map(|i| if mask >> i & 1 == 1 { self.hi[i] } else { self.lo[i] })
                    .collect()
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum Rule {
    Midpoint,
    GaussLegendre { order: usize },
}

impl Rule {
    pub fn points(self) -> usize {
        match self {
            Rule::Midpoint => 1,
            Rule::GaussLegendre { order } => order,
        }
    }

    /// Nodes and weights on `[-1, 1]`.
    pub fn reference(self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Rule::Midpoint => (vec![0.0], vec![2.0]),
            Rule::GaussLegendre { order } => gauss_legendre(order),
        }
    }
}

/// Panel counts per axis plus the per-panel rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    /// One entry per axis, or a single entry broadcast to every axis.
    pub panels: Vec<usize>,
    #[serde(flatten)]
    pub rule: Rule,
}

impl QuadratureGrid {
    pub fn new(panels: Vec<usize>, rule: Rule) -> Self {
        QuadratureGrid { panels, rule }
    }

    /// `2^10` midpoint nodes per axis.
    pub fn default_midpoint() -> Self {
        QuadratureGrid::new(vec![1024], Rule::Midpoint)
    }

    pub fn gauss(panels: usize, order: usize) -> Self {
        QuadratureGrid::new(vec![panels], Rule::GaussLegendre { order })
    }

    pub fn panels_on_axis(&self, axis: usize) -> usize {
        if self.panels.len() == 1 {
            self.panels[0]
        } else {
            self.panels[axis]
        }
    }

    pub fn nodes_on_axis(&self, axis: usize) -> usize {
        self.panels_on_axis(axis) * self.rule.points()
    }

    pub fn doubled(&self) -> Self {
        QuadratureGrid {
            panels: self.panels.iter().map(|p| 2 * p).collect(),
            rule: self.rule,
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.panels.is_empty() || self.panels.contains(&0) {
            return Err(Error::InvalidParameter("grid needs positive panel counts".into()));
        }
        if self.panels.len() != 1 && self.panels.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: self.panels.len(),
            });
        }
        if let Rule::GaussLegendre { order } = self.rule {
            if order == 0 || order > 64 {
                return Err(Error::InvalidParameter(format!(
                    "Gauss-Legendre order {order} outside 1..=64"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Quadrature {
    pub value: Complex64,
    /// `|fine - coarse|` between the grid and its doubling.
    pub error: f64,
    /// Integral of `|f|` on the fine grid.
    pub abs_mass: f64,
    /// Fraction of `abs_mass` carried by the outermost panel layer of each
    /// face, ordered `lo_0, hi_0, lo_1, hi_1, ...`.
    pub face_fraction: Vec<f64>,
}

impl Quadrature {
    pub fn exact(value: Complex64) -> Self {
        Quadrature {
            value,
            error: 0.0,
            abs_mass: value.norm(),
            face_fraction: Vec::new(),
        }
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Pairwise (cascade) summation.
pub fn pairwise_sum(values: &[Complex64]) -> Complex64 {
    match values.len() {
        0 => Complex64::new(0.0, 0.0),
        1 => values[0],
        n => pairwise_sum(&values[..n / 2]) + pairwise_sum(&values[n / 2..]),
    }
}

fn pairwise_sum_real(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => pairwise_sum_real(&values[..n / 2]) + pairwise_sum_real(&values[n / 2..]),
    }
}

struct AxisNodes {
    x: Vec<f64>,
    w: Vec<f64>,
    layer: usize,
}

fn axis_nodes(lo: f64, hi: f64, panels: usize, rule: Rule) -> AxisNodes {
    let (rx, rw) = rule.reference();
    let h = (hi - lo) / panels as f64;
    let mut x = Vec::with_capacity(panels * rx.len());
    let mut w = Vec::with_capacity(panels * rx.len());
    for p in 0..panels {
        let mid = lo + (p as f64 + 0.5) * h;
        for (t, wt) in rx.iter().zip(&rw) {
            x.push(mid + 0.5 * h * t);
            w.push(0.5 * h * wt);
        }
    }
    AxisNodes {
        x,
        w,
        layer: rx.len(),
    }
}

struct ChunkSum {
    value: Complex64,
    abs: f64,
    faces: Vec<f64>,
    bad: Option<Vec<f64>>,
}

fn integrate_once<F>(f: &F, region: &Aabb, grid: &QuadratureGrid) -> Result<Quadrature>
where
    F: Fn(&[f64]) -> Complex64 + Sync + ?Sized,
{
    let dim = region.dim();
    let axes: Vec<AxisNodes> = (0..dim)
        .map(|i| axis_nodes(region.lo[i], region.hi[i], grid.panels_on_axis(i), grid.rule))
        .collect();
    let total: usize = axes.iter().map(|a| a.x.len()).product();
    let chunks = total.div_ceil(CHUNK);
    let sums: Vec<ChunkSum> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = ChunkSum {
                value: Complex64::new(0.0, 0.0),
                abs: 0.0,
                faces: vec![0.0; 2 * dim],
                bad: None,
            };
            let start = c * CHUNK;
            let end = ((c + 1) * CHUNK).min(total);
            let mut idx = vec![0usize; dim];
            let mut rem = start;
            for d in (0..dim).rev() {
                let n = axes[d].x.len();
                idx[d] = rem % n;
                rem /= n;
            }
            let mut x: Vec<f64> = (0..dim).map(|d| axes[d].x[idx[d]]).collect();
            for flat in start..end {
                if flat > start {
                    // odometer increment, last axis fastest
                    let mut d = dim - 1;
                    loop {
                        idx[d] += 1;
                        if idx[d] < axes[d].x.len() {
                            x[d] = axes[d].x[idx[d]];
                            break;
                        }
                        idx[d] = 0;
                        x[d] = axes[d].x[0];
                        d -= 1;
                    }
                }
                let weight: f64 = (0..dim).map(|d| axes[d].w[idx[d]]).product();
                let v = f(&x);
                if !(v.re.is_finite() && v.im.is_finite()) {
                    if acc.bad.is_none() {
                        acc.bad = Some(x.clone());
                    }
                    continue;
                }
                acc.value += v * weight;
                let a = v.norm() * weight;
                acc.abs += a;
                for d in 0..dim {
                    let n = axes[d].x.len();
                    if idx[d] < axes[d].layer {
                        acc.faces[2 * d] += a;
                    }
                    if idx[d] >= n - axes[d].layer {
                        acc.faces[2 * d + 1] += a;
                    }
                }
            }
            acc
        })
        .collect();
    if let Some(at) = sums.iter().find_map(|s| s.bad.clone()) {
        return Err(Error::NonFinite { at });
    }
    let values: Vec<Complex64> = sums.iter().map(|s| s.value).collect();
    let abs: Vec<f64> = sums.iter().map(|s| s.abs).collect();
    let abs_mass = pairwise_sum_real(&abs);
    let face_fraction = (0..2 * dim)
        .map(|k| {
            let m: Vec<f64> = sums.iter().map(|s| s.faces[k]).collect();
            let m = pairwise_sum_real(&m);
            if abs_mass > 0.0 {
                m / abs_mass
            } else {
                0.0
            }
        })
        .collect();
    Ok(Quadrature {
        value: pairwise_sum(&values),
        error: 0.0,
        abs_mass,
        face_fraction,
    })
}

/// Integrates `f` over a bounded `region` with refinement error estimate.
pub fn integrate_box<F>(f: &F, region: &Aabb, grid: &QuadratureGrid) -> Result<Quadrature>
where
    F: Fn(&[f64]) -> Complex64 + Sync + ?Sized,
{
    grid.validate(region.dim())?;
    if !region.is_bounded() {
        return Err(Error::InvalidParameter(format!(
            "cannot integrate over the unbounded region {region:?}"
        )));
    }
    if region.is_empty() {
        return Ok(Quadrature {
            value: Complex64::new(0.0, 0.0),
            error: 0.0,
            abs_mass: 0.0,
            face_fraction: vec![0.0; 2 * region.dim()],
        });
    }
    let coarse = integrate_once(f, region, grid)?;
    let mut fine = integrate_once(f, region, &grid.doubled())?;
    fine.error = (fine.value - coarse.value).norm();
    Ok(fine)
}

/// Nodes and weights of the tensor rule on `region`, without refinement.
pub fn tensor_rule(region: &Aabb, grid: &QuadratureGrid) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    grid.validate(region.dim())?;
    if !region.is_bounded() {
        return Err(Error::InvalidParameter("tensor rule needs a bounded region".into()));
    }
    let dim = region.dim();
    let axes: Vec<AxisNodes> = (0..dim)
        .map(|i| axis_nodes(region.lo[i], region.hi[i], grid.panels_on_axis(i), grid.rule))
        .collect();
    let total: usize = axes.iter().map(|a| a.x.len()).product();
    let mut nodes = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        let mut x = vec![0.0; dim];
        let mut w = 1.0;
        for d in (0..dim).rev() {
            let n = axes[d].x.len();
            x[d] = axes[d].x[rem % n];
            w *= axes[d].w[rem % n];
            rem /= n;
        }
        nodes.push(x);
        weights.push(w);
    }
    Ok((nodes, weights))
}

/// Composite Gauss-Legendre on an interval without refinement, for inner
/// loops that manage their own error control.
pub fn gauss_interval<F>(f: F, lo: f64, hi: f64, panels: usize, order: usize) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    let nodes = axis_nodes(lo, hi, panels, Rule::GaussLegendre { order });
    let terms: Vec<Complex64> = nodes
        .x
        .iter()
        .zip(&nodes.w)
        .map(|(x, w)| f(*x) * *w)
        .collect();
    pairwise_sum(&terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn gauss_legendre_weights_and_exactness() {
        for n in 1..=20 {
            let (x, w) = gauss_legendre(n);
            let s: f64 = w.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n = {n}");
            // exact for x^(2n-2)
            let k = 2 * n - 2;
            let q: f64 = x.iter().zip(&w).map(|(x, w)| x.powi(k as i32) * w).sum();
            assert!((q - 2.0 / (k as f64 + 1.0)).abs() < 1e-13, "n = {n}");
        }
    }

    #[test]
    fn gaussian_integral_in_two_dimensions() {
        let f = |x: &[f64]| c((-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp() / std::f64::consts::TAU);
        let q = integrate_box(&f, &Aabb::cube(&[0.0, 0.0], 9.0), &QuadratureGrid::default_midpoint())
            .unwrap();
        assert!((q.value.re - 1.0).abs() < 1e-8);
        assert!(q.face_fraction.iter().all(|&m| m < 1e-12));
    }

    #[test]
    fn refinement_estimate_tracks_error() {
        let f = |x: &[f64]| c(x[0].exp());
        let q = integrate_box(&f, &Aabb::new(vec![0.0], vec![1.0]), &QuadratureGrid::new(vec![16], Rule::Midpoint))
            .unwrap();
        let exact = 1f64.exp() - 1.0;
        let err = (q.value.re - exact).abs();
        assert!(err > 0.0 && err < q.error);
    }

    #[test]
    fn non_finite_and_unbounded_inputs() {
        let f = |x: &[f64]| c(1.0 / x[0]);
        let r = integrate_box(&f, &Aabb::new(vec![-1.0], vec![1.0]), &QuadratureGrid::new(vec![3], Rule::Midpoint));
        assert!(matches!(r, Err(Error::NonFinite { .. })));
        let g = |_: &[f64]| c(1.0);
        assert!(integrate_box(&g, &Aabb::whole(1), &QuadratureGrid::default_midpoint()).is_err());
    }

    #[test]
    fn chunking_is_deterministic() {
        let f = |x: &[f64]| Complex64::new((3.0 * x[0]).sin(), x[0] * x[0]);
        let r = Aabb::new(vec![0.0], vec![2.0]);
        let g = QuadratureGrid::gauss(5000, 4);
        let a = integrate_box(&f, &r, &g).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| integrate_box(&f, &r, &g).unwrap());
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn box_geometry() {
        let b = Aabb::new(vec![0.0, -1.0], vec![2.0, 1.0]);
        assert_eq!(b.corners().len(), 4);
        assert_eq!(b.volume(), 4.0);
        assert!(b.contains(&[1.0, 0.0]));
        assert_eq!(b.distance_to(&[3.0, 0.0]), 1.0);
        assert!(Aabb::whole(2).intersect(&b) == b);
        assert!((b.max_norm() - 5f64.sqrt()).abs() < 1e-15);
    }
}
