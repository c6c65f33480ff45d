//! Homogeneous measures and the homogenizer triple (space, action, measure).

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::action::Action;
use crate::error::{Error, Result};
use crate::linalg::{norm, spectral_norm};
use crate::quadrature::{gauss_interval, integrate_box, Aabb, Quadrature, QuadratureGrid};
use crate::rgroup::{GroupElement, GroupKind, RGroup};
use crate::testfn::{Integrand, TestFunction};

/// Face mass (relative to the total) above which an integrand is taken to
/// leak out of its declared support.
pub const ESCAPE_FRACTION: f64 = 1e-6;
pub const FACTOR_TOL: f64 = 1e-9;
pub const DEFAULT_TOL_REL: f64 = 1e-6;

type DensityFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Density {
    /// `|x|^q`.
    RadialPower { q: f64 },
    Custom { label: String, func: DensityFn },
}

impl Density {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Density::RadialPower { q } => norm(x).powf(*q),
            Density::Custom { func, .. } => func(x),
        }
    }
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Density::RadialPower { q } => write!(f, "|x|^{q}"),
            Density::Custom { label, .. } => write!(f, "{label}"),
        }
    }
}

#[derive(Clone, Debug)]
pub enum MeasureKind {
    Lebesgue,
    WeightedDensity(Density),
    Dirac(Vec<f64>),
    Constructed(Arc<ConstructedMeasure>),
}

#[derive(Clone, Debug)]
pub struct MeasureDescriptor {
    pub kind: MeasureKind,
    pub dim: usize,
    /// The measure lives on this box (for Dirac masses, the point alone).
    pub domain: Aabb,
}

impl MeasureDescriptor {
    pub fn lebesgue(dim: usize) -> Self {
        MeasureDescriptor {
            kind: MeasureKind::Lebesgue,
            dim,
            domain: Aabb::whole(dim),
        }
    }

    pub fn lebesgue_on(domain: Aabb) -> Self {
        MeasureDescriptor {
            kind: MeasureKind::Lebesgue,
            dim: domain.dim(),
            domain,
        }
    }

    pub fn weighted(density: Density, domain: Aabb) -> Self {
        MeasureDescriptor {
            kind: MeasureKind::WeightedDensity(density),
            dim: domain.dim(),
            domain,
        }
    }

    /// `t^(r-1) dt` on `(0, inf)`.
    pub fn power_half_line(r: f64) -> Self {
        MeasureDescriptor::weighted(
            Density::RadialPower { q: r - 1.0 },
            Aabb::new(vec![0.0], vec![f64::INFINITY]),
        )
    }

    pub fn dirac(point: Vec<f64>) -> Self {
        MeasureDescriptor {
            dim: point.len(),
            domain: Aabb::new(point.clone(), point.clone()),
            kind: MeasureKind::Dirac(point),
        }
    }

    pub fn constructed(m: ConstructedMeasure) -> Self {
        let dim = m.action.dim();
        MeasureDescriptor {
            kind: MeasureKind::Constructed(Arc::new(m)),
            dim,
            domain: Aabb::whole(dim),
        }
    }

    pub fn is_dirac(&self) -> bool {
        matches!(self.kind, MeasureKind::Dirac(_))
    }

    /// Integrates `phi` against the measure.
    pub fn integrate(&self, phi: &Integrand, grid: &QuadratureGrid) -> Result<Quadrature> {
        self.integrate_with(phi, grid, true)
    }

    /// As [`MeasureDescriptor::integrate`]; with `check_escape` off, mass on
    /// the faces of the declared support is accepted (for integrands that
    /// are cut off on purpose).
    pub fn integrate_with(
        &self,
        phi: &Integrand,
        grid: &QuadratureGrid,
        check_escape: bool,
    ) -> Result<Quadrature> {
        if phi.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: phi.dim(),
            });
        }
        match &self.kind {
            MeasureKind::Dirac(p) => Ok(Quadrature::exact(phi.eval(p))),
            MeasureKind::Constructed(m) => m.pair(phi),
            MeasureKind::Lebesgue => self.integrate_density(phi, grid, check_escape, |f, _| f),
            MeasureKind::WeightedDensity(w) => {
                self.integrate_density(phi, grid, check_escape, |f, x| f * w.eval(x))
            }
        }
    }

    fn integrate_density(
        &self,
        phi: &Integrand,
        grid: &QuadratureGrid,
        check_escape: bool,
        weight: impl Fn(Complex64, &[f64]) -> Complex64 + Sync,
    ) -> Result<Quadrature> {
        let region = self.domain.intersect(&phi.support);
        if !region.is_bounded() {
            return Err(Error::InvalidParameter(format!(
                "integrand {} has no bounded support inside the domain",
                phi.label
            )));
        }
        let f = |x: &[f64]| {
            let v = phi.eval(x);
            if v == Complex64::new(0.0, 0.0) {
                v
            } else {
                weight(v, x)
            }
        };
        let q = integrate_box(&f, &region, grid)?;
        if !check_escape {
            return Ok(q);
        }
        for axis in 0..region.dim() {
            for (side, face) in [(0, region.lo[axis]), (1, region.hi[axis])] {
                let domain_face = if side == 0 {
                    self.domain.lo[axis]
                } else {
                    self.domain.hi[axis]
                };
                let fraction = q.face_fraction.get(2 * axis + side).copied().unwrap_or(0.0);
                if face != domain_face && fraction > ESCAPE_FRACTION {
                    return Err(Error::SupportEscape { fraction });
                }
            }
        }
        Ok(q)
    }
}

/// Homogeneity factor `c(eps)`.
#[derive(Clone)]
pub enum FactorMap {
    /// `h(eps^-1)` for the given group's weight.
    Weight(RGroup),
    /// `1 / |det B(eps)|`.
    Jacobian,
    /// `eps^q` on the positive reals.
    Power(f64),
    Custom {
        label: String,
        func: Arc<dyn Fn(GroupElement) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for FactorMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FactorMap::Weight(g) => write!(f, "h(eps^-1) on {g}"),
            FactorMap::Jacobian => write!(f, "1/|det B(eps)|"),
            FactorMap::Power(q) => write!(f, "eps^{q}"),
            FactorMap::Custom { label, .. } => write!(f, "{label}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Homogenizer {
    pub action: Action,
    pub measure: MeasureDescriptor,
    pub factor_map: FactorMap,
    pub grid: QuadratureGrid,
}

impl Homogenizer {
    pub fn new(action: Action, measure: MeasureDescriptor, factor_map: FactorMap) -> Result<Self> {
        if action.dim() != measure.dim {
            return Err(Error::DimensionMismatch {
                expected: action.dim(),
                got: measure.dim,
            });
        }
        Ok(Homogenizer {
            action,
            measure,
            factor_map,
            grid: QuadratureGrid::default_midpoint(),
        })
    }

    pub fn with_grid(mut self, grid: QuadratureGrid) -> Self {
        self.grid = grid;
        self
    }

    pub fn dim(&self) -> usize {
        self.action.dim()
    }

    pub fn factor(&self, eps: GroupElement) -> Result<f64> {
        let g = self.action.group();
        let eps = g.element(eps.0)?;
        Ok(match &self.factor_map {
            FactorMap::Weight(h) => h.weight_h(g.inverse(eps)?),
            FactorMap::Jacobian => 1.0 / self.action.matrix(eps)?.determinant().abs(),
            FactorMap::Power(q) => eps.0.powf(*q),
            FactorMap::Custom { func, .. } => func(eps),
        })
    }

    /// `lambda(phi)`.
    pub fn integrate(&self, phi: &Integrand, grid: &QuadratureGrid) -> Result<Quadrature> {
        self.measure.integrate(phi, grid)
    }

    /// `H_eps(lambda)(phi) = int phi(H_eps x) d lambda(x)`.
    pub fn pushforward_pairing(
        &self,
        eps: GroupElement,
        phi: &Integrand,
        grid: &QuadratureGrid,
    ) -> Result<Quadrature> {
        let composed = phi.compose_action(&self.action, eps)?;
        self.measure.integrate(&composed, grid)
    }

    /// Relative multiplicativity defect `|c(ab) - c(a)c(b)| / (c(a)c(b))`
    /// over all pairs of `samples`.
    pub fn factor_multiplicativity(&self, samples: &[GroupElement]) -> Result<f64> {
        let g = self.action.group();
        let mut worst: f64 = 0.0;
        for &a in samples {
            for &b in samples {
                let prod = self.factor(a)? * self.factor(b)?;
                let c = self.factor(g.compose(a, b)?)?;
                worst = worst.max((c - prod).abs() / prod);
            }
        }
        Ok(worst)
    }

    /// Checks `H_eps(lambda)(phi) = c(eps) lambda(phi)` on every pair of
    /// `eps_values` and `battery`, plus the decay of `c` toward the infimum.
    pub fn verify_homogeneity(
        &self,
        eps_values: &[GroupElement],
        battery: &[Integrand],
        grid: &QuadratureGrid,
        tol_rel: f64,
    ) -> Result<HomogeneityReport> {
        if let MeasureKind::Dirac(_) = self.measure.kind {
            return Err(Error::Precondition(
                "homogeneity is only meaningful for nontrivial measures".into(),
            ));
        }
        let bases = battery
            .par_iter()
            .map(|phi| self.integrate(phi, grid))
            .collect::<Result<Vec<_>>>()?;
        let jobs: Vec<(usize, usize)> = (0..eps_values.len())
            .flat_map(|i| (0..battery.len()).map(move |j| (i, j)))
            .collect();
        let rows = jobs
            .par_iter()
            .map(|&(i, j)| -> Result<HomogeneityRow> {
                let eps = eps_values[i];
                let push = self.pushforward_pairing(eps, &battery[j], grid)?;
                let c = self.factor(eps)?;
                let rhs = bases[j].value * c;
                let abs_err = (push.value - rhs).norm();
                let scale = (bases[j].value * c).norm();
                let rel_err = abs_err / scale;
                let quad_err = push.error + c * bases[j].error;
                Ok(HomogeneityRow {
                    eps,
                    phi: battery[j].label.clone(),
                    lhs: push.value,
                    rhs,
                    factor: c,
                    abs_err,
                    rel_err,
                    quad_err,
                    pass: rel_err <= tol_rel,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let ladder = self.action.group().default_ladder();
        let decay = ladder
            .iter()
            .map(|&e| Ok((e, self.factor(e)?)))
            .collect::<Result<Vec<_>>>()?;
        let decay_ok = decay.windows(2).all(|w| w[1].1 < w[0].1)
            && decay.last().is_some_and(|(_, c)| *c <= 1e-3);
        let mut samples = eps_values.to_vec();
        samples.extend(ladder.iter().step_by(5));
        let multiplicativity = self.factor_multiplicativity(&samples)?;
        let pass = rows.iter().all(|r| r.pass) && decay_ok && multiplicativity <= FACTOR_TOL;
        Ok(HomogeneityReport {
            tol_rel,
            rows,
            decay,
            decay_ok,
            multiplicativity,
            pass,
        })
    }

    /// Masses of smoothed balls `B(center, rho)` (transition width
    /// `0.1 rho`) for each `rho`; passes when they decrease to at most
    /// `1e-3` of the first.
    pub fn verify_center_null(&self, radii: &[f64], grid: &QuadratureGrid) -> Result<CenterNullReport> {
        let center = self.action.center();
        let rows = radii
            .par_iter()
            .map(|&rho| {
                let ball = TestFunction::smooth_ball(center.clone(), rho, 0.1 * rho);
                let q = self.integrate(&Integrand::from(&ball), grid)?;
                Ok(CenterNullRow {
                    rho,
                    mass: q.value.re,
                    error: q.error,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let monotone = rows.windows(2).all(|w| w[1].mass <= w[0].mass);
        let vanishing = match (rows.first(), rows.last()) {
            (Some(a), Some(b)) => b.mass <= 1e-3 * a.mass,
            _ => false,
        };
        Ok(CenterNullReport {
            pass: monotone && vanishing,
            monotone,
            rows,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HomogeneityRow {
    pub eps: GroupElement,
    pub phi: String,
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub factor: f64,
    pub abs_err: f64,
    pub rel_err: f64,
    /// Combined refinement estimate of both sides.
    pub quad_err: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct HomogeneityReport {
    pub tol_rel: f64,
    pub rows: Vec<HomogeneityRow>,
    pub decay: Vec<(GroupElement, f64)>,
    pub decay_ok: bool,
    pub multiplicativity: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CenterNullRow {
    pub rho: f64,
    pub mass: f64,
    pub error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CenterNullReport {
    pub rows: Vec<CenterNullRow>,
    pub monotone: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConstructOptions {
    /// Truncate the group integral where the tail mass drops below this.
    pub tail_mass: f64,
    /// Gauss-Legendre panels per unit of Haar coordinate.
    pub panels_per_unit: f64,
    pub order: usize,
    /// Grid for the outer integral when `mu` has a density.
    pub outer: QuadratureGrid,
    pub max_lower_steps: usize,
}

impl Default for ConstructOptions {
    fn default() -> Self {
        ConstructOptions {
            tail_mass: 1e-10,
            panels_per_unit: 64.0,
            order: 4,
            outer: QuadratureGrid::gauss(8, 4),
            max_lower_steps: 200,
        }
    }
}

/// `lambda(phi) = int d mu(x) int phi(H_eps x) h(eps) dm(eps)`.
#[derive(Clone, Debug)]
pub struct ConstructedMeasure {
    pub group: RGroup,
    pub action: Action,
    pub mu: MeasureDescriptor,
    pub options: ConstructOptions,
}

/// Builds the homogeneous measure generated by `mu` under `action`, weighted
/// by the weight of `group`.
pub fn construct_measure(
    group: RGroup,
    action: Action,
    mu: MeasureDescriptor,
    options: ConstructOptions,
) -> Result<ConstructedMeasure> {
    if group.kind() != action.group().kind() {
        return Err(Error::InvalidParameter(format!(
            "weight group {} does not match the action group {}",
            group.kind(),
            action.group().kind()
        )));
    }
    if mu.dim != action.dim() {
        return Err(Error::DimensionMismatch {
            expected: action.dim(),
            got: mu.dim,
        });
    }
    if matches!(mu.kind, MeasureKind::Constructed(_)) {
        return Err(Error::InvalidParameter("mu must be a Dirac mass or a density".into()));
    }
    if !mu.domain.is_bounded() {
        return Err(Error::Precondition("mu must have compact support".into()));
    }
    let center = action.center();
    if mu.domain.distance_to(&center) <= 0.0 {
        return Err(Error::Precondition(
            "the support of mu must stay away from the action center".into(),
        ));
    }
    Ok(ConstructedMeasure {
        group,
        action,
        mu,
        options,
    })
}

impl ConstructedMeasure {
    /// Inner orbit integral `int phi(H_eps x) h(eps) dm(eps)` with its
    /// refinement error.
    pub fn orbit_integral(&self, phi: &Integrand, x: &[f64]) -> Result<(Complex64, f64)> {
        let g = &self.group;
        let opts = &self.options;
        let s_hi = g.haar_coordinate(g.tail_threshold(opts.tail_mass));
        let reach = phi.support.max_norm();
        let x_norm = norm(x);
        if x_norm == 0.0 {
            return Err(Error::Precondition("orbit of the center".into()));
        }
        // Below s_lo the orbit point satisfies |H_eps x| >= |x| / |B(eps^-1)| > reach.
        let mut s_lo = s_hi.min(0.0);
        for _ in 0..opts.max_lower_steps {
            let eps = g.from_haar(s_lo);
            let inv = g.inverse(eps)?;
            let lower = x_norm / spectral_norm(&self.action.matrix(inv)?);
            if lower > reach {
                break;
            }
            s_lo -= 1.0;
        }
        if s_lo >= s_hi {
            return Ok((Complex64::new(0.0, 0.0), 0.0));
        }
        let f = |s: f64| -> Complex64 {
            let eps = g.from_haar(s);
            match self.action.apply(GroupElement(eps.0), x) {
                Ok(y) => phi.eval(&y) * g.weight_h(eps),
                Err(_) => Complex64::new(f64::NAN, f64::NAN),
            }
        };
        if g.kind() == GroupKind::IntegerAdditive {
            let mut total = Complex64::new(0.0, 0.0);
            let mut n = s_lo.floor();
            while n <= s_hi.ceil() {
                total += f(n);
                n += 1.0;
            }
            return Ok((total, 0.0));
        }
        let panels = ((s_hi - s_lo) * opts.panels_per_unit).ceil().max(1.0) as usize;
        let coarse = gauss_interval(f, s_lo, s_hi, panels, opts.order);
        let fine = gauss_interval(f, s_lo, s_hi, 2 * panels, opts.order);
        if !(fine.re.is_finite() && fine.im.is_finite()) {
            return Err(Error::NonFinite { at: x.to_vec() });
        }
        Ok((fine, (fine - coarse).norm()))
    }

    pub fn pair(&self, phi: &Integrand) -> Result<Quadrature> {
        match &self.mu.kind {
            MeasureKind::Dirac(p) => {
                let (value, error) = self.orbit_integral(phi, p)?;
                Ok(Quadrature {
                    value,
                    error,
                    abs_mass: value.norm(),
                    face_fraction: Vec::new(),
                })
            }
            MeasureKind::Lebesgue | MeasureKind::WeightedDensity(_) => {
                let density = |x: &[f64]| match &self.mu.kind {
                    MeasureKind::WeightedDensity(w) => w.eval(x),
                    _ => 1.0,
                };
                let inner_err = std::sync::Mutex::new(0.0f64);
                let f = |x: &[f64]| match self.orbit_integral(phi, x) {
                    Ok((v, e)) => {
                        let w = density(x);
                        let mut m = inner_err.lock().unwrap();
                        *m = m.max(e * w);
                        v * w
                    }
                    Err(_) => Complex64::new(f64::NAN, f64::NAN),
                };
                let mut q = integrate_box(&f, &self.mu.domain, &self.options.outer)?;
                q.error += *inner_err.lock().unwrap() * self.mu.domain.volume();
                Ok(q)
            }
            _ => Err(Error::InvalidParameter("mu must be a Dirac mass or a density".into())),
        }
    }
}
