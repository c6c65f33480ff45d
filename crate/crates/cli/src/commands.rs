//! One function per subcommand. Each returns the overall verdict and a few
//! summary lines, writing its report files through the [`ReportWriter`].

use homog_core::action::{AbsorptionCertificate, Ball, EscapeReport, GroupLawReport};
use homog_core::contraction::{ContractionFlow, FixedPointReport, SubmultiplicativeReport};
use homog_core::homogenizer::{construct_measure, CenterNullReport, HomogeneityReport, Homogenizer, MeasureDescriptor};
use homog_core::meanvalue::{
    empirical_mean, mean, verify_convolution, verify_translation_invariance, ConvergenceReport, ConvolutionReport,
    TranslationReport,
};
use homog_core::quadrature::{Aabb, QuadratureGrid};
use homog_core::rgroup::{GroupElement, RGroup};
use homog_core::sigma::{verify_sigma_convergence, EpsilonLadder, SigmaOptions, SigmaReport};
use homog_core::Complex64;
use serde::Serialize;

use crate::config::{Loaded, Tolerances};
use crate::report::ReportWriter;
use crate::CliError;

pub type Verdict = (bool, Vec<String>);

/// Shortest round-trip form, in exponent notation outside `[1e-4, 1e6)`.
fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e6).contains(&a) || !a.is_finite() {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn cplx(z: Complex64) -> [String; 2] {
    [num(z.re), num(z.im)]
}

fn mark(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn elements(group: &RGroup, values: &[f64]) -> Result<Vec<GroupElement>, CliError> {
    Ok(values.iter().map(|v| group.element(*v)).collect::<Result<Vec<_>, _>>()?)
}

#[derive(Serialize)]
struct VerifyActionReport {
    group: RGroup,
    dim: usize,
    group_law: GroupLawReport,
    group_law_pass: bool,
    absorption: Option<AbsorptionCertificate>,
    escape: Option<EscapeReport>,
}

pub fn verify_action(l: &Loaded, tol: &Tolerances, w: &mut ReportWriter) -> Result<Verdict, CliError> {
    let group = l.group()?;
    let action = l.action()?;
    let block = l.config.verify_action.clone().unwrap_or_default();
    let ladder = l.ladder(&group)?;
    let group_law = action.certify_group_law(block.samples, l.config.seed)?;
    let group_law_pass = group_law.worst_violation <= tol.group_law && group_law.identity_violation <= tol.group_law;
    let mut lines = vec![format!(
        "group law: worst violation {:.3e} over {} samples [{}]",
        group_law.worst_violation,
        block.samples,
        mark(group_law_pass)
    )];
    let absorption = match &block.absorption {
        Some(a) => Some(action.certify_absorption(&Ball::from(&a.source), &Ball::from(&a.target), &ladder)?),
        None => None,
    };
    let escape = match &block.escape {
        Some(e) => Some(action.certify_escape(&e.point, &ladder, e.radius)?),
        None => None,
    };
    if let Some(a) = &absorption {
        lines.push(format!(
            "absorption: threshold {} [{}]",
            a.threshold.map_or("none".into(), |t| t.to_string()),
            mark(a.pass)
        ));
        let rows: Vec<Vec<String>> = a
            .evidence
            .iter()
            .map(|s| vec![num(s.eps.0), num(s.max_distance), num(s.operator_bound)])
            .collect();
        w.csv("absorption", &["eps", "max_distance", "operator_bound"], &rows)?;
        let pts: Vec<(f64, f64)> = a.evidence.iter().map(|s| (group.haar_coordinate(s.eps), s.max_distance.ln())).collect();
        w.plot("absorption", &pts)?;
    }
    if let Some(e) = &escape {
        lines.push(format!(
            "escape: threshold {} [{}]",
            e.threshold.map_or("none".into(), |t| t.to_string()),
            mark(e.pass)
        ));
        let rows: Vec<Vec<String>> = e.evidence.iter().map(|s| vec![num(s.eps.0), num(s.distance)]).collect();
        w.csv("escape", &["eps", "distance"], &rows)?;
        let pts: Vec<(f64, f64)> = e.evidence.iter().map(|s| (group.haar_coordinate(s.eps), s.distance.ln())).collect();
        w.plot("escape", &pts)?;
    }
    let pass = group_law_pass && absorption.as_ref().is_none_or(|a| a.pass) && escape.as_ref().is_none_or(|e| e.pass);
    let report = VerifyActionReport {
        group,
        dim: action.dim(),
        group_law,
        group_law_pass,
        absorption,
        escape,
    };
    w.json(&report, pass)?;
    Ok((pass, lines))
}

#[derive(Serialize)]
struct ContractReport {
    submultiplicative: SubmultiplicativeReport,
    fixed_points: Vec<FixedPointReport>,
}

pub fn contract(l: &Loaded, tol: &Tolerances, w: &mut ReportWriter) -> Result<Verdict, CliError> {
    let group = l.group()?;
    let flow = ContractionFlow::new(l.action()?);
    let block = l.config.contract.clone().unwrap_or_default();
    let ladder = l.ladder(&group)?;
    let eps = match block.eps {
        Some(v) => group.element(v)?,
        None => ladder[0],
    };
    let submultiplicative = flow.certify_submultiplicative(block.pairs, &ladder, l.config.seed)?;
    let starts = flow.random_starts(block.starts, block.start_radius, l.config.seed);
    let fixed_points = starts
        .iter()
        .map(|x0| flow.fixed_point(eps, x0, tol.fixed_point, block.max_iter))
        .collect::<Result<Vec<_>, _>>()?;
    let fp_pass = fixed_points.iter().all(|f| f.pass);
    let pass = submultiplicative.pass && fp_pass;
    let worst_residual = fixed_points.iter().map(|f| f.residual).fold(0.0, f64::max);
    let lines = vec![
        format!(
            "submultiplicativity: {} violations in {} pairs, l(e) = {} [{}]",
            submultiplicative.violations,
            submultiplicative.pairs,
            submultiplicative.identity_l,
            mark(submultiplicative.pass)
        ),
        format!(
            "fixed points: {} starts, worst residual {:.3e} [{}]",
            fixed_points.len(),
            worst_residual,
            mark(fp_pass)
        ),
    ];
    let rows: Vec<Vec<String>> = fixed_points
        .iter()
        .enumerate()
        .map(|(i, f)| {
            vec![
                i.to_string(),
                f.iterations.to_string(),
                num(f.residual),
                num(f.l_inverse),
                num(f.max_step_ratio),
                num(f.center_distance),
                num(f.independence_gap),
                f.pass.to_string(),
            ]
        })
        .collect();
    w.csv(
        "fixed-points",
        &["start", "iterations", "residual", "l_inverse", "max_step_ratio", "center_distance", "independence_gap", "pass"],
        &rows,
    )?;
    let decay: Vec<Vec<String>> = submultiplicative
        .decay
        .iter()
        .map(|d| vec![num(d.eps.0), num(d.l_inverse)])
        .collect();
    w.csv("decay", &["eps", "l_inverse"], &decay)?;
    let pts: Vec<(f64, f64)> = submultiplicative
        .decay
        .iter()
        .map(|d| (group.haar_coordinate(d.eps), d.l_inverse.ln()))
        .collect();
    w.plot("l-inverse", &pts)?;
    w.json(
        &ContractReport {
            submultiplicative,
            fixed_points,
        },
        pass,
    )?;
    Ok((pass, lines))
}

fn homogeneity_tables(group: &RGroup, r: &HomogeneityReport, w: &mut ReportWriter, table: &str) -> Result<(), CliError> {
    let rows: Vec<Vec<String>> = r
        .rows
        .iter()
        .map(|row| {
            let mut v = vec![num(row.eps.0), row.phi.clone()];
            v.extend(cplx(row.lhs));
            v.extend(cplx(row.rhs));
            v.extend([num(row.factor), num(row.abs_err), num(row.rel_err), num(row.quad_err), row.pass.to_string()]);
            v
        })
        .collect();
    w.csv(
        table,
        &["eps", "phi", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "factor", "abs_err", "rel_err", "quad_err", "pass"],
        &rows,
    )?;
    let pts: Vec<(f64, f64)> = r.decay.iter().map(|(e, c)| (group.haar_coordinate(*e), c.ln())).collect();
    w.plot(&format!("{table}-factor"), &pts)
}

#[derive(Serialize)]
struct HomogeneityDoc {
    homogeneity: HomogeneityReport,
    center_null: Option<CenterNullReport>,
}

pub fn homogeneity(l: &Loaded, tol: &Tolerances, w: &mut ReportWriter) -> Result<Verdict, CliError> {
    let block = l
        .config
        .homogeneity
        .clone()
        .ok_or_else(|| CliError::Config("missing [homogeneity] block".into()))?;
    let group = l.group()?;
    let action = l.action()?;
    let dim = action.dim();
    let hz = Homogenizer::new(action, block.measure.build(dim)?, block.factor.build(&group)?)?;
    let battery = l.battery(&block.battery, dim)?;
    let eps = elements(&group, &block.eps)?;
    let grid = l.grid();
    let report = hz.verify_homogeneity(&eps, &battery, &grid, tol.homogeneity)?;
    let center_null = match &block.center_null {
        Some(radii) => Some(hz.verify_center_null(radii, &grid)?),
        None => None,
    };
    let worst = report.rows.iter().map(|r| r.rel_err).fold(0.0, f64::max);
    let mut lines = vec![format!(
        "homogeneity: {} rows, worst relative error {:.3e}, tolerance {:.1e} [{}]",
        report.rows.len(),
        worst,
        tol.homogeneity,
        mark(report.pass)
    )];
    if let Some(c) = &center_null {
        lines.push(format!("center null: [{}]", mark(c.pass)));
    }
    homogeneity_tables(&group, &report, w, "rows")?;
    let pass = report.pass && center_null.as_ref().is_none_or(|c| c.pass);
    w.json(
        &HomogeneityDoc {
            homogeneity: report,
            center_null,
        },
        pass,
    )?;
    Ok((pass, lines))
}

#[derive(Serialize)]
struct OracleRow {
    phi: String,
    value: Complex64,
    oracle: Complex64,
    rel_err: f64,
    pass: bool,
}

#[derive(Serialize)]
struct ConstructDoc {
    oracle_tol: f64,
    oracle: Vec<OracleRow>,
    homogeneity: HomogeneityReport,
}

pub fn construct(l: &Loaded, tol: &Tolerances, w: &mut ReportWriter) -> Result<Verdict, CliError> {
    let block = l
        .config
        .construct_measure
        .clone()
        .ok_or_else(|| CliError::Config("missing [construct-measure] block".into()))?;
    let group = l.group()?;
    let action = l.action()?;
    let dim = action.dim();
    let m = construct_measure(group, action.clone(), block.seed_measure(), block.options())?;
    let battery = l.battery(&block.battery, dim)?;
    let grid = l.grid();
    let mut oracle = Vec::new();
    if let Some(o) = &block.oracle {
        let reference = o.build(dim)?;
        for phi in &battery {
            let value = m.pair(phi)?.value;
            let want = reference.integrate(phi, &grid)?.value;
            let rel_err = (value - want).norm() / want.norm().max(f64::MIN_POSITIVE);
            oracle.push(OracleRow {
                phi: phi.label.clone(),
                value,
                oracle: want,
                rel_err,
                pass: rel_err <= tol.oracle,
            });
        }
    }
    let hz = Homogenizer::new(action, MeasureDescriptor::constructed(m), block.factor.build(&group)?)?;
    let eps = elements(&group, &block.eps)?;
    let homogeneity = hz.verify_homogeneity(&eps, &battery, &grid, tol.homogeneity)?;
    let oracle_pass = oracle.iter().all(|r| r.pass);
    let worst = oracle.iter().map(|r| r.rel_err).fold(0.0, f64::max);
    let lines = vec![
        format!(
            "oracle: {} functions, worst relative error {:.3e} [{}]",
            oracle.len(),
            worst,
            mark(oracle_pass)
        ),
        format!("homogeneity: [{}]", mark(homogeneity.pass)),
    ];
    let rows: Vec<Vec<String>> = oracle
        .iter()
        .map(|r| {
            let mut v = vec![r.phi.clone()];
            v.extend(cplx(r.value));
            v.extend(cplx(r.oracle));
            v.extend([num(r.rel_err), r.pass.to_string()]);
            v
        })
        .collect();
    w.csv("oracle", &["phi", "value_re", "value_im", "oracle_re", "oracle_im", "rel_err", "pass"], &rows)?;
    homogeneity_tables(&group, &homogeneity, w, "homogeneity")?;
    let pass = oracle_pass && homogeneity.pass;
    w.json(
        &ConstructDoc {
            oracle_tol: tol.oracle,
            oracle,
            homogeneity,
        },
        pass,
    )?;
    Ok((pass, lines))
}

#[derive(Serialize)]
struct MeanEntry {
    label: String,
    class: &'static str,
    closed_form: Complex64,
    expected: Option<Complex64>,
    closed_form_pass: bool,
    empirical: ConvergenceReport,
    empirical_pass: bool,
    translation: Option<TranslationReport>,
    convolution: Option<ConvolutionReport>,
    pass: bool,
}

#[derive(Serialize)]
struct MeanDoc {
    phi: String,
    tol: f64,
    min_order: f64,
    entries: Vec<MeanEntry>,
}

pub fn mean_values(l: &Loaded, tol: &Tolerances, w: &mut ReportWriter) -> Result<Verdict, CliError> {
    let block = l
        .config
        .mean
        .clone()
        .ok_or_else(|| CliError::Config("missing [mean] block".into()))?;
    let group = l.group()?;
    let action = l.action()?;
    let dim = action.dim();
    let measure = match &block.measure {
        Some(m) => m.build(dim)?,
        None => MeasureDescriptor::lebesgue_on(Aabb::new(vec![0.0; dim], vec![1.0; dim])),
    };
    let hz = Homogenizer::new(action, measure, block.factor.build(&group)?)?;
    let phi = l.function(&block.phi)?;
    let ladder = l.ladder(&group)?;
    let grid = l.grid();
    let kernel = match &block.convolution {
        Some(c) => Some(l.function(&c.kernel)?),
        None => None,
    };
    let mut entries = Vec::new();
    let mut lines = Vec::new();
    let mut rows = Vec::new();
    for (i, fs) in block.functions.iter().enumerate() {
        let (u, expected) = l.mean_function(fs, dim)?;
        let closed_form = mean(&u)?;
        let closed_form_pass = expected.is_none_or(|e| (closed_form - e).norm() <= tol.closed_form);
        let empirical = empirical_mean(&u, &hz, &phi, &ladder, &grid)?;
        let empirical_pass = empirical.passes(tol.mean, tol.mean_order);
        let translation = match &block.translation {
            Some(t) => Some(verify_translation_invariance(&u, &hz, &t.shift, &phi, &ladder, &grid, tol.mean)?),
            None => None,
        };
        let convolution = match &kernel {
            Some(f) => Some(verify_convolution(f, &u, &hz, &phi, &ladder, &grid, tol.mean)?),
            None => None,
        };
        let pass = closed_form_pass
            && empirical_pass
            && translation.as_ref().is_none_or(|t| t.pass)
            && convolution.as_ref().is_none_or(|c| c.pass);
        lines.push(format!(
            "{}: mean {}, final error {:.3e}, order {} [{}]",
            u.label(),
            closed_form,
            empirical.final_error,
            empirical.order.map_or("n/a".into(), |p| format!("{p:.3}")),
            mark(pass)
        ));
        for r in &empirical.rows {
            let mut v = vec![u.label().to_string(), num(r.eps.0)];
            v.extend(cplx(r.value));
            v.extend([num(r.error), num(r.quad_err)]);
            rows.push(v);
        }
        let pts: Vec<(f64, f64)> = empirical
            .rows
            .iter()
            .map(|r| (group.haar_coordinate(r.eps), r.error.ln()))
            .collect();
        w.plot(&format!("{i:02}-{}", u.label()), &pts)?;
        entries.push(MeanEntry {
            label: u.label().to_string(),
            class: u.class_name(),
            closed_form,
            expected,
            closed_form_pass,
            empirical,
            empirical_pass,
            translation,
            convolution,
            pass,
        });
    }
    w.csv("empirical", &["function", "eps", "value_re", "value_im", "error", "quad_err"], &rows)?;
    let pass = entries.iter().all(|e| e.pass);
    w.json(
        &MeanDoc {
            phi: phi.label.clone(),
            tol: tol.mean,
            min_order: tol.mean_order,
            entries,
        },
        pass,
    )?;
    Ok((pass, lines))
}

pub fn sigma(l: &Loaded, tol: &Tolerances, w: &mut ReportWriter) -> Result<Verdict, CliError> {
    let block = l
        .config
        .sigma
        .clone()
        .ok_or_else(|| CliError::Config("missing [sigma] block".into()))?;
    let group = l.group()?;
    let action = l.action()?;
    let domain = Aabb::new(block.domain.lo.clone(), block.domain.hi.clone());
    let algebra = Loaded::algebra(&block.algebra, domain.dim())?;
    let u = l.field(&block.u, &algebra, &domain)?;
    let battery = block
        .battery
        .iter()
        .map(|n| l.field(n, &algebra, &domain))
        .collect::<Result<Vec<_>, _>>()?;
    let ladder = EpsilonLadder::new(group, l.ladder(&group)?)?;
    let opts = SigmaOptions {
        tol: tol.sigma,
        min_order: tol.sigma_order,
        p: block.p,
        norm_grid: QuadratureGrid::gauss(block.norm_panels, 8),
    };
    let report: SigmaReport = verify_sigma_convergence(&u, &battery, &action, &ladder, &l.grid(), &opts)?;
    let mut lines = Vec::new();
    let mut rows = Vec::new();
    for (i, s) in report.series.iter().chain(std::iter::once(&report.weak_mean)).enumerate() {
        lines.push(format!(
            "{} x {}: final relative error {:.3e}, order {} [{}]",
            report.u,
            s.psi,
            s.final_rel_err,
            s.order.map_or("n/a".into(), |p| format!("{p:.3}")),
            mark(s.pass)
        ));
        for r in &s.rows {
            let mut v = vec![s.psi.clone(), num(r.eps.0)];
            v.extend(cplx(r.lhs));
            v.extend(cplx(r.rhs));
            v.extend([num(r.abs_err), num(r.rel_err), num(r.quad_err)]);
            rows.push(v);
        }
        let pts: Vec<(f64, f64)> = s.rows.iter().map(|r| (group.haar_coordinate(r.eps), r.rel_err.ln())).collect();
        w.plot(&format!("{i:02}-{}", s.psi), &pts)?;
    }
    lines.push(format!(
        "mean compatibility: gap {:.3e} [{}]",
        report.mean_compat.gap,
        mark(report.mean_compat.pass)
    ));
    lines.push(format!(
        "trace norm bound: {} checks [{}]",
        report.norm_checks.len(),
        mark(report.norm_pass)
    ));
    w.csv(
        "pairings",
        &["psi", "eps", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "abs_err", "rel_err", "quad_err"],
        &rows,
    )?;
    let norms: Vec<Vec<String>> = report
        .norm_checks
        .iter()
        .map(|c| vec![c.field.clone(), num(c.eps.0), num(c.p), num(c.lhs), num(c.rhs), c.pass.to_string()])
        .collect();
    w.csv("norms", &["field", "eps", "p", "lhs", "rhs", "pass"], &norms)?;
    w.json(&report, report.pass)?;
    Ok((report.pass, lines))
}
