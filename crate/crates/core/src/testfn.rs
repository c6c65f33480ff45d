//! Test functions with known numerical support, and integrands built from
//! them.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::error::Result;
use crate::linalg::distance;
use crate::quadrature::Aabb;
use crate::rgroup::GroupElement;

/// Half-width of a Gaussian's numerical support, in units of its width.
/// `exp(-81/2) ~ 2.6e-18`.
pub const GAUSSIAN_CUTOFF: f64 = 9.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum TestFunction {
    /// `amplitude * exp(-|x - center|^2 / (2 width^2))`.
    Gaussian {
        center: Vec<f64>,
        width: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `amplitude * exp(1 - 1 / (1 - |x - center|^2 / radius^2))` inside the
    /// ball, zero outside; peak value `amplitude`.
    Bump {
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Smoothed indicator of a ball: 1 up to `radius`, 0 beyond
    /// `radius + transition`, with a smooth monotone step in between.
    SmoothBall {
        center: Vec<f64>,
        radius: f64,
        transition: f64,
    },
}

fn one() -> f64 {
    1.0
}

/// Smooth step from 1 at `t <= 0` to 0 at `t >= 1`.
pub fn smooth_step_down(t: f64) -> f64 {
    fn f(t: f64) -> f64 {
        if t > 0.0 {
            (-1.0 / t).exp()
        } else {
            0.0
        }
    }
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        let a = f(1.0 - t);
        a / (a + f(t))
    }
}

impl TestFunction {
    pub fn gaussian(center: Vec<f64>, width: f64) -> Self {
        TestFunction::Gaussian {
            center,
            width,
            amplitude: 1.0,
        }
    }

    pub fn bump(center: Vec<f64>, radius: f64) -> Self {
        TestFunction::Bump {
            center,
            radius,
            amplitude: 1.0,
        }
    }

    pub fn smooth_ball(center: Vec<f64>, radius: f64, transition: f64) -> Self {
        TestFunction::SmoothBall {
            center,
            radius,
            transition,
        }
    }

    pub fn dim(&self) -> usize {
        self.center().len()
    }

    pub fn center(&self) -> &[f64] {
        match self {
            TestFunction::Gaussian { center, .. }
            | TestFunction::Bump { center, .. }
            | TestFunction::SmoothBall { center, .. } => center,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Gaussian {
                center,
                width,
                amplitude,
            } => {
                let d2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                amplitude * (-0.5 * d2 / (width * width)).exp()
            }
            TestFunction::Bump {
                center,
                radius,
                amplitude,
            } => {
                let s = (distance(x, center) / radius).powi(2);
                if s >= 1.0 {
                    0.0
                } else {
                    amplitude * (1.0 - 1.0 / (1.0 - s)).exp()
                }
            }
            TestFunction::SmoothBall {
                center,
                radius,
                transition,
            } => smooth_step_down((distance(x, center) - radius) / transition),
        }
    }

    /// Closed box outside which the function vanishes (numerically, for
    /// Gaussians).
    pub fn support(&self) -> Aabb {
        let half = match self {
            TestFunction::Gaussian { width, .. } => GAUSSIAN_CUTOFF * width,
            TestFunction::Bump { radius, .. } => *radius,
            TestFunction::SmoothBall {
                radius, transition, ..
            } => radius + transition,
        };
        Aabb::cube(self.center(), half)
    }

    pub fn is_nonnegative(&self) -> bool {
        match self {
            TestFunction::Gaussian { amplitude, .. } | TestFunction::Bump { amplitude, .. } => {
                *amplitude >= 0.0
            }
            TestFunction::SmoothBall { .. } => true,
        }
    }

    /// Three center-offset Gaussians of different widths plus one bump.
    pub fn default_battery(dim: usize) -> Vec<TestFunction> {
        let offset = |s: f64| (0..dim).map(|i| s * (1.0 + 0.25 * i as f64)).collect::<Vec<_>>();
        vec![
            TestFunction::gaussian(offset(0.5), 0.3),
            TestFunction::gaussian(offset(1.0), 0.6),
            TestFunction::gaussian(offset(-0.8), 1.0),
            TestFunction::bump(offset(0.7), 0.5),
        ]
    }
}

type Func = Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>;

/// Complex function on `R^N` together with a box containing its support.
#[derive(Clone)]
pub struct Integrand {
    pub label: String,
    pub support: Aabb,
    func: Func,
}

impl fmt::Debug for Integrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Integrand")
            .field("label", &self.label)
            .field("support", &self.support)
            .finish()
    }
}

impl Integrand {
    pub fn new(
        label: impl Into<String>,
        support: Aabb,
        func: impl Fn(&[f64]) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Integrand {
            label: label.into(),
            support,
            func: Arc::new(func),
        }
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        (self.func)(x)
    }

    pub fn func(&self) -> &(dyn Fn(&[f64]) -> Complex64 + Send + Sync) {
        &*self.func
    }

    pub fn scaled(&self, a: Complex64) -> Integrand {
        let f = self.func.clone();
        Integrand::new(format!("{a}*{}", self.label), self.support.clone(), move |x| {
            a * f(x)
        })
    }

    /// Pointwise sum; the support is the bounding box of both.
    pub fn add(&self, other: &Integrand) -> Integrand {
        let (f, g) = (self.func.clone(), other.func.clone());
        let support = Aabb::new(
            self.support.lo.iter().zip(&other.support.lo).map(|(a, b)| a.min(*b)).collect(),
            self.support.hi.iter().zip(&other.support.hi).map(|(a, b)| a.max(*b)).collect(),
        );
        Integrand::new(format!("{}+{}", self.label, other.label), support, move |x| {
            f(x) + g(x)
        })
    }

    /// `x -> f(H_eps(x))`, supported in `H_{eps^-1}(supp f)`.
    pub fn compose_action(&self, action: &Action, eps: GroupElement) -> Result<Integrand> {
        let inv = action.group().inverse(eps)?;
        let support = action.image_box(inv, &self.support)?;
        let b = action.matrix(eps)?;
        let n = b.nrows();
        let rows: Vec<f64> = b.transpose().as_slice().to_vec();
        let f = self.func.clone();
        Ok(Integrand::new(
            format!("{}∘H({})", self.label, eps.0),
            support,
            move |x| {
                let mut buf = [0.0; 8];
                let mut heap;
                let y: &mut [f64] = if n <= 8 {
                    &mut buf[..n]
                } else {
                    heap = vec![0.0; n];
                    &mut heap
                };
                for (i, yi) in y.iter_mut().enumerate() {
                    *yi = rows[i * n..(i + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum();
                }
                f(y)
            },
        ))
    }
}

impl From<&TestFunction> for Integrand {
    fn from(t: &TestFunction) -> Self {
        let label = match t {
            TestFunction::Gaussian { width, .. } => format!("gaussian(w={width})"),
            TestFunction::Bump { radius, .. } => format!("bump(r={radius})"),
            TestFunction::SmoothBall { radius, .. } => format!("ball(r={radius})"),
        };
        let tf = t.clone();
        Integrand::new(label, t.support(), move |x| Complex64::new(tf.eval(x), 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rgroup::RGroup;

    #[test]
    fn smooth_step_is_monotone_and_symmetric() {
        let mut prev = 1.0;
        for i in 0..=100 {
            let t = i as f64 / 100.0;
            let v = smooth_step_down(t);
            assert!(v <= prev);
            assert!((v + smooth_step_down(1.0 - t) - 1.0).abs() < 1e-15);
            prev = v;
        }
    }

    #[test]
    fn supports_contain_the_mass() {
        let g = TestFunction::gaussian(vec![1.0, -1.0], 0.5);
        let s = g.support();
        assert!(g.eval(&[s.hi[0], -1.0]) < 1e-17);
        let b = TestFunction::bump(vec![0.0], 2.0);
        assert_eq!(b.eval(&[2.0]), 0.0);
        assert_eq!(b.eval(&[0.0]), 1.0);
        let ball = TestFunction::smooth_ball(vec![0.0], 1.0, 0.1);
        assert_eq!(ball.eval(&[0.99]), 1.0);
        assert_eq!(ball.eval(&[1.1]), 0.0);
    }

    #[test]
    fn composed_support_follows_the_action() {
        let a = Action::diagonal_scaling(RGroup::positive_multiplicative(1.0).unwrap(), vec![1])
            .unwrap();
        let f = Integrand::from(&TestFunction::bump(vec![1.0], 0.5));
        let g = f.compose_action(&a, GroupElement(0.5)).unwrap();
        // f(2x) is supported in [0.25, 0.75]
        assert!((g.support.lo[0] - 0.25).abs() < 1e-15);
        assert!((g.support.hi[0] - 0.75).abs() < 1e-15);
        assert_eq!(g.eval(&[0.5]), f.eval(&[1.0]));
    }
}
