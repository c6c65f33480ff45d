//! Contraction flows: the Lipschitz function `l(eps)` and the center as a
//! fixed point of `H_{eps^-1}`.

use rand::Rng;
use serde::Serialize;

use crate::action::Action;
use crate::error::{Error, Result};
use crate::linalg::{distance, norm, spectral_norm};
use crate::rgroup::{GroupElement, GroupKind};
use crate::sampling;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 100_000;
pub const SUBMULT_SLACK: f64 = 1e-9;
pub const STEP_SLACK: f64 = 1e-9;
pub const SAMPLED_PAIRS: usize = 10_000;

#[derive(Clone, Debug)]
pub struct ContractionFlow {
    action: Action,
}

impl ContractionFlow {
    pub fn new(action: Action) -> Self {
        ContractionFlow { action }
    }

    pub fn action(&self) -> &Action {
        &self.action
    }

    /// Operator norm of `B(eps)`; every built-in action is linear, so this
    /// is the exact supremum.
    pub fn lipschitz_l(&self, eps: GroupElement) -> Result<f64> {
        Ok(spectral_norm(&self.action.matrix(eps)?))
    }

    /// Largest difference quotient over deterministic point pairs in the
    /// ball of radius `radius`; a lower bound for `l(eps)`.
    pub fn sampled_lipschitz(&self, eps: GroupElement, pairs: usize, radius: f64, seed: u64) -> Result<f64> {
        let n = self.action.dim();
        let mut rng = sampling::rng(seed);
        let mut best: f64 = 0.0;
        for _ in 0..pairs {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-radius..radius)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-radius..radius)).collect();
            let d = distance(&x, &y);
            if d == 0.0 {
                continue;
            }
            let q = distance(&self.action.apply(eps, &x)?, &self.action.apply(eps, &y)?) / d;
            best = best.max(q);
        }
        Ok(best)
    }

    fn draw(&self, rng: &mut rand_chacha::ChaCha8Rng) -> GroupElement {
        match self.action.group().kind() {
            GroupKind::PositiveMultiplicative => GroupElement(rng.random_range(-3.0..3.0f64).exp()),
            GroupKind::RealAdditive => GroupElement(rng.random_range(-3.0..3.0)),
            GroupKind::IntegerAdditive => GroupElement(rng.random_range(-3..=3) as f64),
        }
    }

    /// Samples `l(eps eps') <= l(eps) l(eps')` and checks the decay of
    /// `l(eps^-1)` along `ladder`.
    pub fn certify_submultiplicative(
        &self,
        sample_pairs: usize,
        ladder: &[GroupElement],
        seed: u64,
    ) -> Result<SubmultiplicativeReport> {
        let g = self.action.group();
        let mut rng = sampling::rng(seed);
        let mut worst_ratio: f64 = 0.0;
        let mut violations = 0;
        for _ in 0..sample_pairs {
            let a = self.draw(&mut rng);
            let b = self.draw(&mut rng);
            let lhs = self.lipschitz_l(g.compose(a, b)?)?;
            let rhs = self.lipschitz_l(a)? * self.lipschitz_l(b)?;
            let ratio = lhs / rhs;
            worst_ratio = worst_ratio.max(ratio);
            if lhs > rhs * (1.0 + SUBMULT_SLACK) {
                violations += 1;
            }
        }
        let identity_l = self.lipschitz_l(g.identity())?;
        let decay = ladder
            .iter()
            .map(|&eps| {
                Ok(DecaySample {
                    eps,
                    l_inverse: self.lipschitz_l(g.inverse(eps)?)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let monotone = decay
            .windows(2)
            .all(|w| w[1].l_inverse <= w[0].l_inverse * (1.0 + SUBMULT_SLACK));
        let last = decay.last().map_or(f64::INFINITY, |s| s.l_inverse);
        let sup_l_inverse = decay.iter().map(|s| s.l_inverse).fold(0.0, f64::max);
        let pass = violations == 0
            && (identity_l - 1.0).abs() <= 1e-12
            && monotone
            && last <= 1e-3
            && sup_l_inverse.is_finite();
        Ok(SubmultiplicativeReport {
            pairs: sample_pairs,
            seed,
            worst_ratio,
            violations,
            identity_l,
            decay,
            monotone_decay: monotone,
            sup_l_inverse,
            pass,
        })
    }

    /// Iterates `x -> H_{eps^-1}(x)` from `x0` until successive points are
    /// within `tol`, then repeats at `eps^2` to check the limit does not
    /// depend on the parameter.
    pub fn fixed_point(
        &self,
        eps: GroupElement,
        x0: &[f64],
        tol: f64,
        max_iter: usize,
    ) -> Result<FixedPointReport> {
        if tol <= 0.0 {
            return Err(Error::InvalidParameter("tol must be positive".into()));
        }
        let g = self.action.group();
        let run = self.iterate(eps, x0, tol, max_iter)?;
        let eps2 = g.compose(eps, eps)?;
        let second = self.iterate(eps2, x0, tol, max_iter)?;
        let center = self.action.center();
        let residual = distance(&self.action.apply_inverse(eps, &run.limit)?, &run.limit);
        let center_distance = distance(&run.limit, &center);
        let independence_gap = distance(&run.limit, &second.limit);
        let ratio_ok = run.max_step_ratio <= run.l_inverse + STEP_SLACK;
        let pass = residual <= tol
            && center_distance <= 10.0 * tol
            && independence_gap <= 2.0 * tol
            && ratio_ok;
        Ok(FixedPointReport {
            eps,
            x0: x0.to_vec(),
            l_inverse: run.l_inverse,
            iterations: run.iterations,
            limit: run.limit,
            residual,
            max_step_ratio: run.max_step_ratio,
            center_distance,
            second_eps: eps2,
            independence_gap,
            pass,
        })
    }

    fn iterate(&self, eps: GroupElement, x0: &[f64], tol: f64, max_iter: usize) -> Result<Run> {
        let g = self.action.group();
        let l_inverse = self.lipschitz_l(g.inverse(eps)?)?;
        if l_inverse >= 1.0 {
            return Err(Error::NotContraction { l: l_inverse });
        }
        let mut x = x0.to_vec();
        let mut prev_step: Option<f64> = None;
        let mut max_step_ratio: f64 = 0.0;
        for it in 1..=max_iter {
            let next = self.action.apply_inverse(eps, &x)?;
            let step = distance(&next, &x);
            if !step.is_finite() {
                return Err(Error::NonFinite { at: x });
            }
            if let Some(p) = prev_step {
                if p > 0.0 {
                    max_step_ratio = max_step_ratio.max(step / p);
                }
            }
            x = next;
            if step <= tol {
                return Ok(Run {
                    l_inverse,
                    iterations: it,
                    limit: x,
                    max_step_ratio,
                });
            }
            prev_step = Some(step);
        }
        Err(Error::NoConvergence {
            iterations: max_iter,
            last_step: prev_step.unwrap_or(f64::NAN),
        })
    }

    /// Deterministic random starting points with norms up to `radius`.
    pub fn random_starts(&self, count: usize, radius: f64, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = sampling::rng(seed);
        (0..count)
            .map(|_| {
                let v: Vec<f64> = (0..self.action.dim())
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect();
                let s = radius / norm(&v).max(1.0);
                v.into_iter().map(|c| c * s).collect()
            })
            .collect()
    }
}

struct Run {
    l_inverse: f64,
    iterations: usize,
    limit: Vec<f64>,
    max_step_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecaySample {
    pub eps: GroupElement,
    pub l_inverse: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SubmultiplicativeReport {
    pub pairs: usize,
    pub seed: u64,
    /// Largest `l(eps eps') / (l(eps) l(eps'))` seen.
    pub worst_ratio: f64,
    pub violations: usize,
    pub identity_l: f64,
    pub decay: Vec<DecaySample>,
    pub monotone_decay: bool,
    pub sup_l_inverse: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FixedPointReport {
    pub eps: GroupElement,
    pub x0: Vec<f64>,
    pub l_inverse: f64,
    pub iterations: usize,
    pub limit: Vec<f64>,
    pub residual: f64,
    pub max_step_ratio: f64,
    pub center_distance: f64,
    pub second_eps: GroupElement,
    pub independence_gap: f64,
    pub pass: bool,
}
