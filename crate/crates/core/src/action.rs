//! Absorptive continuous group actions on `R^N`.
//!
//! Every built-in variant is linear: `H_eps(x) = B(eps) x`. The center of
//! each action is the origin. Certificates for the group law, absorption and
//! escape to infinity are produced by sampling ball boundaries, and for the
//! linear variants an operator-norm bound is recorded next to the samples.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{block_diag, distance, expm, mat_vec, norm, spectral_norm};
use crate::quadrature::Aabb;
use crate::rgroup::{GroupElement, GroupKind, RGroup};
use crate::sampling;

/// Absolute slack on the group-law certificate, scaled by `1 + |x|`.
pub const GROUP_LAW_TOL: f64 = 1e-9;

/// Points closer than this to the center are treated as the center.
pub const CENTER_TOL: f64 = 1e-12;

/// Matrix-valued map `eps -> B(eps)`.
pub type MatrixFamily = Arc<dyn Fn(GroupElement) -> DMatrix<f64> + Send + Sync>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        Ball { center, radius }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        distance(&self.center, x) < self.radius
    }

    /// Sampled boundary points (`64 * N` directions); the center alone when
    /// the radius is zero.
    pub fn boundary_samples(&self) -> Vec<Vec<f64>> {
        if self.radius == 0.0 {
            return vec![self.center.clone()];
        }
        sampling::sphere_directions(self.dim(), 64 * self.dim())
            .into_iter()
            .map(|d| {
                d.iter()
                    .zip(&self.center)
                    .map(|(u, c)| c + self.radius * u)
                    .collect()
            })
            .collect()
    }
}

#[derive(Clone)]
pub enum Variant {
    /// `x_i / eps^{r_i}` over the positive reals.
    DiagonalScaling { exponents: Vec<u32> },
    /// Arbitrary matrix family; the group law is the caller's claim.
    LinearFamily {
        dim: usize,
        label: String,
        family: MatrixFamily,
    },
    /// `exp(-k eps) exp(-eps P)` over the additive reals.
    ExpSemigroup { k: f64, p: DMatrix<f64> },
    /// An action of the additive reals carried to the positive reals (or
    /// back) through the order isomorphism `eps -> ln eps`.
    Transported { inner: Box<Action> },
    Product(Vec<Action>),
}

impl fmt::Debug for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::DiagonalScaling { exponents } => f
                .debug_struct("DiagonalScaling")
                .field("exponents", exponents)
                .finish(),
            Variant::LinearFamily { dim, label, .. } => f
                .debug_struct("LinearFamily")
                .field("dim", dim)
                .field("label", label)
                .finish(),
            Variant::ExpSemigroup { k, p } => f
                .debug_struct("ExpSemigroup")
                .field("k", k)
                .field("p", p)
                .finish(),
            Variant::Transported { inner } => {
                f.debug_struct("Transported").field("inner", inner).finish()
            }
            Variant::Product(factors) => f.debug_tuple("Product").field(factors).finish(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Action {
    group: RGroup,
    dim: usize,
    variant: Variant,
}

impl Action {
    pub fn diagonal_scaling(group: RGroup, exponents: Vec<u32>) -> Result<Self> {
        if group.kind() != GroupKind::PositiveMultiplicative {
            return Err(Error::InvalidAction(
                "diagonal scaling acts through the positive-multiplicative group".into(),
            ));
        }
        if exponents.is_empty() || exponents.contains(&0) {
            return Err(Error::InvalidAction(
                "diagonal scaling needs at least one exponent, all >= 1".into(),
            ));
        }
        Ok(Action {
            group,
            dim: exponents.len(),
            variant: Variant::DiagonalScaling { exponents },
        })
    }

    pub fn linear_family(
        group: RGroup,
        dim: usize,
        label: impl Into<String>,
        family: MatrixFamily,
    ) -> Result<Self> {
        let b = family(group.identity());
        if b.nrows() != dim || b.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: b.nrows(),
            });
        }
        Ok(Action {
            group,
            dim,
            variant: Variant::LinearFamily {
                dim,
                label: label.into(),
                family,
            },
        })
    }

    pub fn exp_semigroup(group: RGroup, k: f64, p: DMatrix<f64>) -> Result<Self> {
        if group.kind() != GroupKind::RealAdditive {
            return Err(Error::InvalidAction(
                "the exponential semigroup acts through the real-additive group".into(),
            ));
        }
        if !p.is_square() || p.nrows() == 0 {
            return Err(Error::InvalidAction("P must be a non-empty square matrix".into()));
        }
        let pn = spectral_norm(&p);
        if k <= pn {
            return Err(Error::InvalidAction(format!(
                "need k > |P| for absorption, got k = {k}, |P| = {pn}"
            )));
        }
        Ok(Action {
            group,
            dim: p.nrows(),
            variant: Variant::ExpSemigroup { k, p },
        })
    }

    /// Re-parametrizes `inner` over `group` through the Haar coordinates.
    pub fn transported(inner: Action, group: RGroup) -> Result<Self> {
        let continuous = |k: GroupKind| k != GroupKind::IntegerAdditive;
        if !continuous(group.kind()) || !continuous(inner.group.kind()) {
            return Err(Error::InvalidAction(
                "transport is defined between the additive and multiplicative reals".into(),
            ));
        }
        Ok(Action {
            group,
            dim: inner.dim,
            variant: Variant::Transported {
                inner: Box::new(inner),
            },
        })
    }

    pub fn product(factors: Vec<Action>) -> Result<Self> {
        let first = factors
            .first()
            .ok_or_else(|| Error::InvalidAction("product of zero actions".into()))?;
        let group = first.group;
        if factors.iter().any(|f| f.group != group) {
            return Err(Error::InvalidAction(
                "product factors must share one group".into(),
            ));
        }
        let dim = factors.iter().map(|f| f.dim).sum();
        Ok(Action {
            group,
            dim,
            variant: Variant::Product(factors),
        })
    }

    pub fn group(&self) -> &RGroup {
        &self.group
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn variant(&self) -> &Variant {
        &self.variant
    }

    pub fn center(&self) -> Vec<f64> {
        vec![0.0; self.dim]
    }

    fn check(&self, eps: GroupElement, x: &[f64]) -> Result<GroupElement> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        self.group.element(eps.0)
    }

    fn inner_parameter(&self, inner: &Action, eps: GroupElement) -> GroupElement {
        inner.group.from_haar(self.group.haar_coordinate(eps))
    }

    /// `H_eps(x)`.
    pub fn apply(&self, eps: GroupElement, x: &[f64]) -> Result<Vec<f64>> {
        let eps = self.check(eps, x)?;
        match &self.variant {
            Variant::DiagonalScaling { exponents } => Ok(x
                .iter()
                .zip(exponents)
                .map(|(xi, &r)| xi / eps.0.powi(r as i32))
                .collect()),
            Variant::Product(factors) => self.per_factor(factors, x, |f, xs| f.apply(eps, xs)),
            Variant::Transported { inner } => inner.apply(self.inner_parameter(inner, eps), x),
            _ => Ok(mat_vec(&self.matrix(eps)?, x)),
        }
    }

    /// `H_{eps^-1}(x)`.
    pub fn apply_inverse(&self, eps: GroupElement, x: &[f64]) -> Result<Vec<f64>> {
        let eps = self.check(eps, x)?;
        match &self.variant {
            Variant::DiagonalScaling { exponents } => Ok(x
                .iter()
                .zip(exponents)
                .map(|(xi, &r)| xi * eps.0.powi(r as i32))
                .collect()),
            Variant::LinearFamily { family, .. } => {
                let inv = family(eps)
                    .try_inverse()
                    .ok_or(Error::SingularMatrix { at: eps.0 })?;
                Ok(mat_vec(&inv, x))
            }
            Variant::ExpSemigroup { .. } => self.apply(GroupElement(-eps.0), x),
            Variant::Transported { inner } => {
                inner.apply_inverse(self.inner_parameter(inner, eps), x)
            }
            Variant::Product(factors) => {
                self.per_factor(factors, x, |f, xs| f.apply_inverse(eps, xs))
            }
        }
    }

    fn per_factor(
        &self,
        factors: &[Action],
        x: &[f64],
        op: impl Fn(&Action, &[f64]) -> Result<Vec<f64>>,
    ) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.dim);
        let mut offset = 0;
        for f in factors {
            out.extend(op(f, &x[offset..offset + f.dim])?);
            offset += f.dim;
        }
        Ok(out)
    }

    /// Representing matrix `B(eps)`.
    pub fn matrix(&self, eps: GroupElement) -> Result<DMatrix<f64>> {
        let eps = self.group.element(eps.0)?;
        Ok(match &self.variant {
            Variant::DiagonalScaling { exponents } => DMatrix::from_diagonal(
                &nalgebra::DVector::from_iterator(
                    exponents.len(),
                    exponents.iter().map(|&r| eps.0.powi(-(r as i32))),
                ),
            ),
            Variant::LinearFamily { family, dim, .. } => {
                let b = family(eps);
                if b.nrows() != *dim || b.ncols() != *dim {
                    return Err(Error::DimensionMismatch {
                        expected: *dim,
                        got: b.nrows(),
                    });
                }
                b
            }
            Variant::ExpSemigroup { k, p } => expm(&(p * -eps.0)) * (-k * eps.0).exp(),
            Variant::Transported { inner } => inner.matrix(self.inner_parameter(inner, eps))?,
            Variant::Product(factors) => block_diag(
                &factors
                    .iter()
                    .map(|f| f.matrix(eps))
                    .collect::<Result<Vec<_>>>()?,
            ),
        })
    }

    /// Bounding box of `H_eps(region)`.
    pub fn image_box(&self, eps: GroupElement, region: &Aabb) -> Result<Aabb> {
        if region.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: region.dim(),
            });
        }
        if let Variant::DiagonalScaling { exponents } = &self.variant {
            let eps = self.group.element(eps.0)?;
            let (lo, hi) = exponents
                .iter()
                .enumerate()
                .map(|(i, &r)| {
                    let s = eps.0.powi(-(r as i32));
                    (region.lo[i] * s, region.hi[i] * s)
                })
                .unzip();
            return Ok(Aabb::new(lo, hi));
        }
        if !region.is_bounded() {
            return Ok(Aabb::whole(self.dim));
        }
        let b = self.matrix(eps)?;
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for corner in region.corners() {
            let y = mat_vec(&b, &corner);
            for i in 0..self.dim {
                lo[i] = lo[i].min(y[i]);
                hi[i] = hi[i].max(y[i]);
            }
        }
        Ok(Aabb::new(lo, hi))
    }

    /// Checks `H_eps(H_eps'(x)) = H_{eps eps'}(x)` and `H_e = id` on seeded
    /// random samples.
    pub fn certify_group_law(&self, sample_count: usize, seed: u64) -> Result<GroupLawReport> {
        if sample_count == 0 {
            return Err(Error::InvalidParameter("sample_count must be >= 1".into()));
        }
        let mut rng = sampling::rng(seed);
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> GroupElement {
            match self.group.kind() {
                GroupKind::PositiveMultiplicative => GroupElement(rng.random_range(-1.0..1.0f64).exp()),
                GroupKind::RealAdditive => GroupElement(rng.random_range(-1.0..1.0)),
                GroupKind::IntegerAdditive => GroupElement(rng.random_range(-2..=2) as f64),
            }
        };
        let mut worst: Option<GroupLawSample> = None;
        let mut identity_violation: f64 = 0.0;
        for _ in 0..sample_count {
            let e1 = draw(&mut rng);
            let e2 = draw(&mut rng);
            let x: Vec<f64> = (0..self.dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            let lhs = self.apply(e1, &self.apply(e2, &x)?)?;
            let rhs = self.apply(self.group.compose(e1, e2)?, &x)?;
            let scale = 1.0 + norm(&x);
            let v = distance(&lhs, &rhs) / scale;
            if worst.as_ref().is_none_or(|w| v > w.violation) {
                worst = Some(GroupLawSample {
                    eps: e1,
                    eps_prime: e2,
                    x: x.clone(),
                    violation: v,
                });
            }
            let id = self.apply(self.group.identity(), &x)?;
            identity_violation = identity_violation.max(distance(&id, &x) / scale);
        }
        let worst_violation = worst.as_ref().map_or(0.0, |w| w.violation);
        let pass = worst_violation <= GROUP_LAW_TOL && identity_violation <= GROUP_LAW_TOL;
        Ok(GroupLawReport {
            samples: sample_count,
            seed,
            tolerance: GROUP_LAW_TOL,
            worst_violation,
            worst,
            identity_violation,
            pass,
        })
    }

    /// Finds the largest ladder element `alpha` such that the sampled
    /// boundary of `source` lands inside `target` under `H_{eps^-1}` for
    /// every ladder `eps <= alpha`.
    pub fn certify_absorption(
        &self,
        source: &Ball,
        target: &Ball,
        ladder: &[GroupElement],
    ) -> Result<AbsorptionCertificate> {
        let center = self.center();
        if target.dim() != self.dim || source.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: target.dim().min(source.dim()),
            });
        }
        if distance(&target.center, &center) > CENTER_TOL {
            return Err(Error::Precondition(
                "the target neighbourhood must be centered at the action center".into(),
            ));
        }
        check_toward_theta(ladder)?;
        let points = source.boundary_samples();
        let reach = distance(&source.center, &center) + source.radius;
        let evidence = ladder
            .par_iter()
            .map(|&eps| -> Result<AbsorptionSample> {
                let mut max_distance: f64 = 0.0;
                for x in &points {
                    let y = self.apply_inverse(eps, x)?;
                    max_distance = max_distance.max(distance(&y, &center));
                }
                let inv = self.group.inverse(eps)?;
                let operator_bound = spectral_norm(&self.matrix(inv)?) * reach;
                Ok(AbsorptionSample {
                    eps,
                    max_distance,
                    operator_bound,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let threshold = suffix_start(&evidence, |s| s.max_distance < target.radius)
            .map(|i| ladder[i]);
        let bound_threshold = suffix_start(&evidence, |s| s.operator_bound < target.radius)
            .map(|i| ladder[i]);
        Ok(AbsorptionCertificate {
            target: target.clone(),
            source: source.clone(),
            pass: threshold.is_some(),
            threshold,
            bound_threshold,
            evidence,
        })
    }

    /// Checks that `|H_eps(x) - center|` exceeds `radius` along the tail of
    /// the ladder.
    pub fn certify_escape(
        &self,
        x: &[f64],
        ladder: &[GroupElement],
        radius: f64,
    ) -> Result<EscapeReport> {
        let center = self.center();
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if distance(x, &center) <= CENTER_TOL {
            return Err(Error::Precondition(
                "escape is only defined for points away from the center".into(),
            ));
        }
        check_toward_theta(ladder)?;
        let evidence = ladder
            .iter()
            .map(|&eps| {
                Ok(EscapeSample {
                    eps,
                    distance: distance(&self.apply(eps, x)?, &center),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let threshold = suffix_start(&evidence, |s| s.distance > radius).map(|i| ladder[i]);
        Ok(EscapeReport {
            point: x.to_vec(),
            radius,
            pass: threshold.is_some(),
            threshold,
            evidence,
        })
    }
}

fn check_toward_theta(ladder: &[GroupElement]) -> Result<()> {
    if ladder.is_empty() {
        return Err(Error::InvalidParameter("empty ladder".into()));
    }
    if ladder.windows(2).any(|w| w[1].0 >= w[0].0) {
        return Err(Error::InvalidParameter(
            "ladder must decrease strictly toward the infimum".into(),
        ));
    }
    Ok(())
}

/// Index of the first element of the longest suffix satisfying `ok`.
fn suffix_start<T>(items: &[T], ok: impl Fn(&T) -> bool) -> Option<usize> {
    let mut start = items.len();
    while start > 0 && ok(&items[start - 1]) {
        start -= 1;
    }
    (start < items.len()).then_some(start)
}

#[derive(Clone, Debug, Serialize)]
pub struct GroupLawSample {
    pub eps: GroupElement,
    pub eps_prime: GroupElement,
    pub x: Vec<f64>,
    pub violation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GroupLawReport {
    pub samples: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub worst_violation: f64,
    pub worst: Option<GroupLawSample>,
    pub identity_violation: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct AbsorptionSample {
    pub eps: GroupElement,
    /// Largest sampled `|H_{eps^-1}(x) - center|` over the source boundary.
    pub max_distance: f64,
    /// `|B(eps^-1)| (|c_K - center| + rho_K)`, an upper bound over the ball.
    pub operator_bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AbsorptionCertificate {
    pub target: Ball,
    pub source: Ball,
    pub threshold: Option<GroupElement>,
    pub bound_threshold: Option<GroupElement>,
    pub evidence: Vec<AbsorptionSample>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EscapeSample {
    pub eps: GroupElement,
    pub distance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EscapeReport {
    pub point: Vec<f64>,
    pub radius: f64,
    pub threshold: Option<GroupElement>,
    pub evidence: Vec<EscapeSample>,
    pub pass: bool,
}
