//! Ordered groups of reals that drive the scaling actions.
//!
//! Three concrete groups are supported: the additive reals, the positive
//! reals under multiplication, and the additive integers. Each carries an
//! identity `e`, an infimum `theta` (in the extended reals), a continuous
//! weight homomorphism `h` into the positive reals, and the tail mass
//! `nu(E_alpha)` of `h` against Haar measure.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer-valued elements are accepted within this distance of an integer.
pub const INTEGRALITY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupKind {
    /// `(R, +)` with `h(eps) = exp(-r eps)`.
    RealAdditive,
    /// `(R+*, x)` with `h(eps) = eps^-r`.
    PositiveMultiplicative,
    /// `(Z, +)` with `h(n) = a^n`.
    IntegerAdditive,
}

impl GroupKind {
    pub fn name(self) -> &'static str {
        match self {
            GroupKind::RealAdditive => "real-additive",
            GroupKind::PositiveMultiplicative => "positive-multiplicative",
            GroupKind::IntegerAdditive => "integer-additive",
        }
    }

    /// `r = 1` for the continuous groups, `a = 0.5` for the integers.
    pub fn default_weight(self) -> f64 {
        match self {
            GroupKind::IntegerAdditive => 0.5,
            _ => 1.0,
        }
    }
}

impl fmt::Display for GroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A group element, carried as a double for every kind.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupElement(pub f64);

impl GroupElement {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One of the canonical ordered groups together with its weight parameter
/// (`r > 0` for the continuous kinds, `a` in `(0, 1)` for the integers).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RGroup {
    kind: GroupKind,
    weight_param: f64,
}

impl RGroup {
    pub fn new(kind: GroupKind, weight_param: f64) -> Result<Self> {
        let ok = match kind {
            GroupKind::IntegerAdditive => weight_param > 0.0 && weight_param < 1.0,
            _ => weight_param > 0.0 && weight_param.is_finite(),
        };
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "weight parameter {weight_param} out of range for the {kind} group"
            )));
        }
        Ok(RGroup { kind, weight_param })
    }

    pub fn with_default_weight(kind: GroupKind) -> Self {
        RGroup {
            kind,
            weight_param: kind.default_weight(),
        }
    }

    pub fn real_additive(r: f64) -> Result<Self> {
        Self::new(GroupKind::RealAdditive, r)
    }

    pub fn positive_multiplicative(r: f64) -> Result<Self> {
        Self::new(GroupKind::PositiveMultiplicative, r)
    }

    pub fn integer_additive(a: f64) -> Result<Self> {
        Self::new(GroupKind::IntegerAdditive, a)
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn weight_param(&self) -> f64 {
        self.weight_param
    }

    /// Validates and wraps a raw value.
    pub fn element(&self, value: f64) -> Result<GroupElement> {
        let violation = Error::DomainViolation {
            group: self.kind.name(),
            value,
        };
        if !value.is_finite() {
            return Err(violation);
        }
        match self.kind {
            GroupKind::RealAdditive => Ok(GroupElement(value)),
            GroupKind::PositiveMultiplicative if value > 0.0 => Ok(GroupElement(value)),
            GroupKind::PositiveMultiplicative => Err(violation),
            GroupKind::IntegerAdditive => {
                let rounded = value.round();
                if (value - rounded).abs() <= INTEGRALITY_TOL {
                    Ok(GroupElement(rounded))
                } else {
                    Err(violation)
                }
            }
        }
    }

    pub fn contains(&self, eps: GroupElement) -> bool {
        self.element(eps.0).is_ok()
    }

    pub fn identity(&self) -> GroupElement {
        match self.kind {
            GroupKind::PositiveMultiplicative => GroupElement(1.0),
            _ => GroupElement(0.0),
        }
    }

    /// Greatest lower bound `theta` of the group in the extended reals.
    pub fn infimum(&self) -> f64 {
        match self.kind {
            GroupKind::PositiveMultiplicative => 0.0,
            _ => f64::NEG_INFINITY,
        }
    }

    pub fn compose(&self, a: GroupElement, b: GroupElement) -> Result<GroupElement> {
        let a = self.element(a.0)?;
        let b = self.element(b.0)?;
        match self.kind {
            GroupKind::PositiveMultiplicative => self.element(a.0 * b.0),
            _ => self.element(a.0 + b.0),
        }
    }

    pub fn inverse(&self, a: GroupElement) -> Result<GroupElement> {
        let a = self.element(a.0)?;
        match self.kind {
            GroupKind::PositiveMultiplicative => self.element(1.0 / a.0),
            _ => Ok(GroupElement(-a.0)),
        }
    }

    /// Natural order of the reals.
    pub fn compare(&self, a: GroupElement, b: GroupElement) -> Ordering {
        a.0.total_cmp(&b.0)
    }

    /// Weight homomorphism `h`.
    pub fn weight_h(&self, eps: GroupElement) -> f64 {
        let r = self.weight_param;
        match self.kind {
            GroupKind::RealAdditive => (-r * eps.0).exp(),
            GroupKind::PositiveMultiplicative => eps.0.powf(-r),
            GroupKind::IntegerAdditive => r.powf(eps.0),
        }
    }

    /// `nu(E_alpha) = int_{eps >= alpha} h dm` in closed form.
    pub fn tail_mass(&self, alpha: GroupElement) -> f64 {
        let r = self.weight_param;
        match self.kind {
            GroupKind::RealAdditive => (-r * alpha.0).exp() / r,
            GroupKind::PositiveMultiplicative => alpha.0.powf(-r) / r,
            GroupKind::IntegerAdditive => r.powf(alpha.0.ceil()) / (1.0 - r),
        }
    }

    /// Smallest element `alpha` with `tail_mass(alpha) <= mass`.
    pub fn tail_threshold(&self, mass: f64) -> GroupElement {
        let r = self.weight_param;
        match self.kind {
            GroupKind::RealAdditive => GroupElement(-(mass * r).ln() / r),
            GroupKind::PositiveMultiplicative => GroupElement((mass * r).powf(-1.0 / r)),
            GroupKind::IntegerAdditive => GroupElement(((mass * (1.0 - r)).ln() / r.ln()).ceil()),
        }
    }

    /// Coordinate in which Haar measure is `ds` (counting measure for `Z`).
    pub fn haar_coordinate(&self, eps: GroupElement) -> f64 {
        match self.kind {
            GroupKind::PositiveMultiplicative => eps.0.ln(),
            _ => eps.0,
        }
    }

    /// Inverse of [`RGroup::haar_coordinate`]; rounds for the integers.
    pub fn from_haar(&self, s: f64) -> GroupElement {
        match self.kind {
            GroupKind::PositiveMultiplicative => GroupElement(s.exp()),
            GroupKind::RealAdditive => GroupElement(s),
            GroupKind::IntegerAdditive => GroupElement(s.round()),
        }
    }

    /// Twenty steps toward `theta`: `2^-1 .. 2^-20` for the positive reals,
    /// `-1 .. -20` for the additive kinds.
    pub fn default_ladder(&self) -> Vec<GroupElement> {
        (1..=20)
            .map(|n| match self.kind {
                GroupKind::PositiveMultiplicative => GroupElement(2f64.powi(-n)),
                _ => GroupElement(-(n as f64)),
            })
            .collect()
    }
}

impl fmt::Display for RGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = match self.kind {
            GroupKind::IntegerAdditive => "a",
            _ => "r",
        };
        write!(f, "{} ({p} = {})", self.kind, self.weight_param)
    }
}
