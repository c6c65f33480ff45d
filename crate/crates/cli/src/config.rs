//! Experiment configuration: TOML schema and conversion into core objects.

use std::collections::BTreeMap;
use std::ops::Range;
use std::sync::Arc;

use homog_core::action::{Action, Ball};
use homog_core::algebra::{AlgebraElement, HAlgebra, DEFAULT_DEGREE};
use homog_core::homogenizer::{ConstructOptions, Density, FactorMap, MeasureDescriptor};
use homog_core::linalg::spectral_norm;
use homog_core::meanvalue::MeanFunction;
use homog_core::quadrature::{Aabb, QuadratureGrid};
use homog_core::rgroup::{GroupElement, GroupKind, RGroup};
use homog_core::sigma::{EpsilonLadder, MacroFactor, TwoScaleField};
use homog_core::testfn::{Integrand, TestFunction};
use homog_core::trig::TrigPolynomial;
use homog_core::Complex64;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub group: GroupConfig,
    pub action: ActionConfig,
    pub grid: Option<QuadratureGrid>,
    pub ladder: Option<LadderConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub functions: BTreeMap<String, TestFunction>,
    #[serde(default)]
    pub fields: BTreeMap<String, FieldConfig>,
    pub verify_action: Option<VerifyActionConfig>,
    pub contract: Option<ContractConfig>,
    pub homogeneity: Option<HomogeneityConfig>,
    pub construct_measure: Option<ConstructConfig>,
    pub mean: Option<MeanConfig>,
    pub sigma: Option<SigmaConfig>,
}

fn default_seed() -> u64 {
    1
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub kind: GroupKind,
    pub weight: Option<f64>,
}

impl GroupConfig {
    pub fn build(&self) -> Result<RGroup, CliError> {
        Ok(RGroup::new(self.kind, self.weight.unwrap_or(self.kind.default_weight()))?)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ActionConfig {
    DiagonalScaling {
        exponents: Vec<u32>,
    },
    /// `k` defaults to `|P| + 1`.
    ExpSemigroup {
        k: Option<f64>,
        p: Vec<Vec<f64>>,
    },
    Transported {
        #[serde(rename = "inner-group")]
        inner_group: GroupConfig,
        inner: Box<ActionConfig>,
    },
    Product {
        factors: Vec<ActionConfig>,
    },
}

impl ActionConfig {
    pub fn build(&self, group: RGroup) -> Result<Action, CliError> {
        Ok(match self {
            ActionConfig::DiagonalScaling { exponents } => Action::diagonal_scaling(group, exponents.clone())?,
            ActionConfig::ExpSemigroup { k, p } => {
                let n = p.len();
                if n == 0 || p.iter().any(|row| row.len() != n) {
                    return Err(CliError::Config("exp-semigroup: p must be a square matrix".into()));
                }
                let m = DMatrix::from_row_iterator(n, n, p.iter().flatten().copied());
                let k = k.unwrap_or_else(|| spectral_norm(&m) + 1.0);
                Action::exp_semigroup(group, k, m)?
            }
            ActionConfig::Transported { inner_group, inner } => {
                Action::transported(inner.build(inner_group.build()?)?, group)?
            }
            ActionConfig::Product { factors } => {
                Action::product(factors.iter().map(|f| f.build(group)).collect::<Result<_, _>>()?)?
            }
        })
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderConfig {
    /// Dyadic range `2^-first .. 2^-last` (or `-first .. -last` on the
    /// additive groups).
    pub first: Option<i32>,
    pub last: Option<i32>,
    pub values: Option<Vec<f64>>,
}

impl LadderConfig {
    pub fn build(&self, group: &RGroup) -> Result<Vec<GroupElement>, CliError> {
        let raw: Vec<f64> = match (&self.values, self.first, self.last) {
            (Some(v), None, None) => v.clone(),
            (None, Some(a), Some(b)) if a <= b => (a..=b)
                .map(|k| match group.kind() {
                    GroupKind::PositiveMultiplicative => 0.5f64.powi(k),
                    _ => -(k as f64),
                })
                .collect(),
            _ => {
                return Err(CliError::Config(
                    "ladder: give either `values` or `first <= last`".into(),
                ))
            }
        };
        let values = raw.into_iter().map(|v| group.element(v)).collect::<Result<Vec<_>, _>>()?;
        Ok(EpsilonLadder::new(*group, values)?.values)
    }
}

/// Numeric thresholds; every key can be replaced with `--tol-override`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", default)]
pub struct Tolerances {
    pub group_law: f64,
    pub fixed_point: f64,
    pub homogeneity: f64,
    pub oracle: f64,
    pub closed_form: f64,
    pub mean: f64,
    pub mean_order: f64,
    pub sigma: f64,
    pub sigma_order: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            group_law: 1e-9,
            fixed_point: 1e-12,
            homogeneity: 1e-6,
            oracle: 1e-5,
            closed_form: 1e-10,
            mean: 1e-2,
            mean_order: 0.9,
            sigma: 1e-2,
            sigma_order: 0.9,
        }
    }
}

impl Tolerances {
    pub fn set(&mut self, key: &str, value: f64) -> Result<(), CliError> {
        let key = key.replace('_', "-");
        let mut table = toml::Table::try_from(&*self).map_err(|e| CliError::Config(e.to_string()))?;
        if !table.contains_key(&key) {
            let known: Vec<&str> = table.keys().map(String::as_str).collect();
            return Err(CliError::Config(format!(
                "unknown tolerance `{key}` (known: {})",
                known.join(", ")
            )));
        }
        table.insert(key, toml::Value::Float(value));
        *self = table.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        Ok(())
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallConfig {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl From<&BallConfig> for Ball {
    fn from(b: &BallConfig) -> Self {
        Ball::new(b.center.clone(), b.radius)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EscapeConfig {
    pub point: Vec<f64>,
    pub radius: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsorptionConfig {
    pub source: BallConfig,
    pub target: BallConfig,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct VerifyActionConfig {
    #[serde(default = "default_samples")]
    pub samples: usize,
    pub absorption: Option<AbsorptionConfig>,
    pub escape: Option<EscapeConfig>,
}

fn default_samples() -> usize {
    1000
}

impl Default for VerifyActionConfig {
    fn default() -> Self {
        VerifyActionConfig {
            samples: default_samples(),
            absorption: None,
            escape: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ContractConfig {
    #[serde(default = "default_samples")]
    pub pairs: usize,
    /// Parameter of the iterated map `H_{eps^-1}`; defaults to the first
    /// ladder value.
    pub eps: Option<f64>,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default = "default_start_radius")]
    pub start_radius: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_starts() -> usize {
    10
}

fn default_start_radius() -> f64 {
    10.0
}

fn default_max_iter() -> usize {
    homog_core::contraction::DEFAULT_MAX_ITER
}

impl Default for ContractConfig {
    fn default() -> Self {
        ContractConfig {
            pairs: default_samples(),
            eps: None,
            starts: default_starts(),
            start_radius: default_start_radius(),
            max_iter: default_max_iter(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasureConfig {
    Lebesgue,
    LebesgueOn { lo: Vec<f64>, hi: Vec<f64> },
    /// `t^(r-1) dt` on the positive half line.
    PowerHalfLine { r: f64 },
    /// `|x|^q dx` on the whole space.
    RadialPower { q: f64 },
    Dirac { point: Vec<f64> },
}

impl MeasureConfig {
    pub fn build(&self, dim: usize) -> Result<MeasureDescriptor, CliError> {
        let m = match self {
            MeasureConfig::Lebesgue => MeasureDescriptor::lebesgue(dim),
            MeasureConfig::LebesgueOn { lo, hi } => {
                if lo.len() != hi.len() {
                    return Err(CliError::Config("lebesgue-on: lo and hi differ in length".into()));
                }
                MeasureDescriptor::lebesgue_on(Aabb::new(lo.clone(), hi.clone()))
            }
            MeasureConfig::PowerHalfLine { r } => MeasureDescriptor::power_half_line(*r),
            MeasureConfig::RadialPower { q } => MeasureDescriptor::weighted(Density::RadialPower { q: *q }, Aabb::whole(dim)),
            MeasureConfig::Dirac { point } => MeasureDescriptor::dirac(point.clone()),
        };
        if m.dim != dim {
            return Err(CliError::Config(format!(
                "measure has dimension {}, the action {dim}",
                m.dim
            )));
        }
        Ok(m)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FactorConfig {
    /// `h(eps^-1)` for the weight `r` (default: the configured group's).
    Weight { r: Option<f64> },
    Jacobian,
    Power { q: f64 },
}

impl FactorConfig {
    pub fn build(&self, group: &RGroup) -> Result<FactorMap, CliError> {
        Ok(match self {
            FactorConfig::Weight { r } => {
                FactorMap::Weight(RGroup::new(group.kind(), r.unwrap_or(group.weight_param()))?)
            }
            FactorConfig::Jacobian => FactorMap::Jacobian,
            FactorConfig::Power { q } => FactorMap::Power(*q),
        })
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct HomogeneityConfig {
    pub measure: MeasureConfig,
    pub factor: FactorConfig,
    pub eps: Vec<f64>,
    /// Names from `[functions]`; the default battery when absent.
    pub battery: Option<Vec<Spanned<String>>>,
    pub center_null: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SeedMeasureConfig {
    Dirac { point: Vec<f64> },
    LebesgueOn { lo: Vec<f64>, hi: Vec<f64> },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConstructConfig {
    pub mu: SeedMeasureConfig,
    pub eps: Vec<f64>,
    pub battery: Option<Vec<Spanned<String>>>,
    #[serde(default = "default_weight_factor")]
    pub factor: FactorConfig,
    /// Closed-form measure the construction should reproduce.
    pub oracle: Option<MeasureConfig>,
    pub panels_per_unit: Option<f64>,
    pub order: Option<usize>,
    pub tail_mass: Option<f64>,
}

fn default_weight_factor() -> FactorConfig {
    FactorConfig::Weight { r: None }
}

impl ConstructConfig {
    pub fn seed_measure(&self) -> MeasureDescriptor {
        match &self.mu {
            SeedMeasureConfig::Dirac { point } => MeasureDescriptor::dirac(point.clone()),
            SeedMeasureConfig::LebesgueOn { lo, hi } => MeasureDescriptor::lebesgue_on(Aabb::new(lo.clone(), hi.clone())),
        }
    }

    pub fn options(&self) -> ConstructOptions {
        let mut o = ConstructOptions::default();
        if let Some(p) = self.panels_per_unit {
            o.panels_per_unit = p;
        }
        if let Some(n) = self.order {
            o.order = n;
        }
        if let Some(t) = self.tail_mass {
            o.tail_mass = t;
        }
        o
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexConfig {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl From<ComplexConfig> for Complex64 {
    fn from(c: ComplexConfig) -> Self {
        Complex64::new(c.re, c.im)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTermConfig {
    pub freq: Vec<f64>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeanFunctionConfig {
    SinSquared {
        expect: Option<ComplexConfig>,
    },
    Constant {
        value: ComplexConfig,
        dim: Option<usize>,
        expect: Option<ComplexConfig>,
    },
    /// Periodic when every frequency is an integer, almost periodic
    /// otherwise.
    Trig {
        label: Option<String>,
        terms: Vec<TrigTermConfig>,
        expect: Option<ComplexConfig>,
    },
    /// `xi + f(x)` with `f` a named compactly supported test function.
    Vanishing {
        xi: ComplexConfig,
        function: Spanned<String>,
        expect: Option<ComplexConfig>,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranslationConfig {
    pub shift: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvolutionConfig {
    pub kernel: Spanned<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct MeanConfig {
    pub functions: Vec<MeanFunctionConfig>,
    /// Weight of the empirical means, a name from `[functions]`.
    pub phi: Spanned<String>,
    /// Defaults to Lebesgue measure on the unit cube.
    pub measure: Option<MeasureConfig>,
    #[serde(default = "default_jacobian")]
    pub factor: FactorConfig,
    pub translation: Option<TranslationConfig>,
    pub convolution: Option<ConvolutionConfig>,
}

fn default_jacobian() -> FactorConfig {
    FactorConfig::Jacobian
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AlgebraConfig {
    Periodic,
    ApSubgroup {
        generators: Vec<Vec<f64>>,
        degree: Option<u32>,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffConfig {
    pub index: Vec<i64>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldTermConfig {
    pub factor: MacroFactor,
    pub coeffs: Vec<CoeffConfig>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub terms: Vec<FieldTermConfig>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SigmaConfig {
    pub domain: DomainConfig,
    pub algebra: AlgebraConfig,
    pub u: Spanned<String>,
    pub battery: Vec<Spanned<String>>,
    #[serde(default = "default_p")]
    pub p: f64,
    /// Gauss-Legendre panels (order 8) for the eps-free norms.
    #[serde(default = "default_norm_panels")]
    pub norm_panels: usize,
}

fn default_p() -> f64 {
    2.0
}

fn default_norm_panels() -> usize {
    64
}

/// Parsed configuration together with its source text, for span-anchored
/// messages.
pub struct Loaded {
    pub config: ExperimentConfig,
    pub source: String,
}

fn position(source: &str, span: Range<usize>) -> (usize, usize) {
    let before = &source[..span.start.min(source.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

impl Loaded {
    pub fn parse(source: String) -> Result<Self, CliError> {
        let config: ExperimentConfig = toml::from_str(&source).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Loaded { config, source })
    }

    fn unknown(&self, what: &str, name: &Spanned<String>) -> CliError {
        let (line, col) = position(&self.source, name.span());
        CliError::Config(format!(
            "line {line}, column {col}: unknown {what} `{}`",
            name.get_ref()
        ))
    }

    pub fn group(&self) -> Result<RGroup, CliError> {
        self.config.group.build()
    }

    pub fn action(&self) -> Result<Action, CliError> {
        self.config.action.build(self.group()?)
    }

    pub fn grid(&self) -> QuadratureGrid {
        self.config.grid.clone().unwrap_or_else(QuadratureGrid::default_midpoint)
    }

    pub fn ladder(&self, group: &RGroup) -> Result<Vec<GroupElement>, CliError> {
        match &self.config.ladder {
            Some(l) => l.build(group),
            None => Ok(group.default_ladder()),
        }
    }

    pub fn function(&self, name: &Spanned<String>) -> Result<Integrand, CliError> {
        let tf = self
            .config
            .functions
            .get(name.get_ref())
            .ok_or_else(|| self.unknown("function", name))?;
        let mut f = Integrand::from(tf);
        f.label = name.get_ref().clone();
        Ok(f)
    }

    pub fn battery(&self, names: &Option<Vec<Spanned<String>>>, dim: usize) -> Result<Vec<Integrand>, CliError> {
        let list = match names {
            Some(names) => names.iter().map(|n| self.function(n)).collect::<Result<Vec<_>, _>>()?,
            None => TestFunction::default_battery(dim)
                .iter()
                .enumerate()
                .map(|(i, tf)| {
                    let mut f = Integrand::from(tf);
                    f.label = format!("default-{i}");
                    f
                })
                .collect(),
        };
        if let Some(bad) = list.iter().find(|f| f.dim() != dim) {
            return Err(CliError::Config(format!(
                "function `{}` has dimension {}, expected {dim}",
                bad.label,
                bad.dim()
            )));
        }
        Ok(list)
    }

    pub fn mean_function(&self, block: &MeanFunctionConfig, dim: usize) -> Result<(MeanFunction, Option<Complex64>), CliError> {
        Ok(match block {
            MeanFunctionConfig::SinSquared { expect } => (MeanFunction::sin_squared(), expect.map(Into::into)),
            MeanFunctionConfig::Constant { value, dim: d, expect } => {
                (MeanFunction::constant(d.unwrap_or(dim), (*value).into()), expect.map(Into::into))
            }
            MeanFunctionConfig::Trig { label, terms, expect } => {
                let d = terms.first().map_or(dim, |t| t.freq.len());
                let t = TrigPolynomial::new(d, terms.iter().map(|t| (t.freq.clone(), Complex64::new(t.re, t.im))))?;
                let label = label.clone().unwrap_or_else(|| format!("trig{:?}", t.spectrum()));
                let u = if t.has_integer_frequencies() {
                    MeanFunction::periodic_trig(label, t)?
                } else {
                    MeanFunction::almost_periodic(label, t)
                };
                (u, expect.map(Into::into))
            }
            MeanFunctionConfig::Vanishing { xi, function, expect } => {
                let f = self.function(function)?;
                let xi: Complex64 = (*xi).into();
                let label = format!("{xi}+{}", f.label);
                let u = MeanFunction::vanishing(label, f.dim(), xi, move |x| xi + f.eval(x));
                (u, expect.map(Into::into))
            }
        })
    }

    pub fn algebra(block: &AlgebraConfig, dim: usize) -> Result<Arc<HAlgebra>, CliError> {
        Ok(match block {
            AlgebraConfig::Periodic => HAlgebra::periodic(dim),
            AlgebraConfig::ApSubgroup { generators, degree } => {
                HAlgebra::ap_subgroup(generators.clone(), degree.unwrap_or(DEFAULT_DEGREE))?
            }
        })
    }

    pub fn field(&self, name: &Spanned<String>, algebra: &Arc<HAlgebra>, domain: &Aabb) -> Result<TwoScaleField, CliError> {
        let block = self
            .config
            .fields
            .get(name.get_ref())
            .ok_or_else(|| self.unknown("field", name))?;
        let terms = block
            .terms
            .iter()
            .map(|t| {
                let w = AlgebraElement::from_indices(
                    algebra,
                    t.coeffs.iter().map(|c| (c.index.clone(), Complex64::new(c.re, c.im))),
                )?;
                Ok((t.factor.clone(), w))
            })
            .collect::<Result<Vec<_>, homog_core::Error>>()?;
        Ok(TwoScaleField::new(name.get_ref().clone(), domain.clone(), terms)?)
    }
}
