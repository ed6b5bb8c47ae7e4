use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::f64::consts::PI;

use super::calibration::Calibration;
use super::config::*;
use super::graded_abscissae;
use super::report::{Check, Report, Table};
use crate::error::{Error, Result};
use crate::flatness::{dichotomy, dyadic_flatness_report_with, harnack_dichotomy_check, Branch, FlatnessReport, FlatnessSettings};
use crate::geometry::{dist, MetricField, SpdMatrix};
use crate::heat::{
    dirichlet_gap_series, duhamel_difference, envelope_ratio, gaussian_bound_fit, heat_constant, solve_heat,
    symmetry_residual, Domain, GaussianSample, SolvePlan,
};
use crate::kernel::{
    kernel_constant, kernel_time_quadrature, r_sweep, tail_integral_constant, tail_integral_numeric, EstimateKind,
    KernelModel,
};
use crate::nmc::{fractional_perimeter_with, nmc_pv_with, nmc_unpaired, viscosity_bound_check_at, ViscositySettings};
use crate::quad::linear_fit;
use crate::solver::solve_minimal_graph_with;

/// Runs one experiment. Reports are deterministic in (config, calibration).
pub fn run(config: &ExperimentConfig, calibration: Option<&Calibration>) -> Result<Report> {
    config.validate()?;
    let mut report = Report::new(config, calibration.map(|c| c.version.clone()));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    match &config.params {
        Params::KernelCheck(p) => kernel_check(p, &mut rng, &mut report)?,
        Params::HeatCheck(p) => heat_check(p, &mut report)?,
        Params::EstimateSweep(p) => estimate_sweep(p, calibration, &mut report)?,
        Params::NmcEval(p) => nmc_eval(p, &mut report)?,
        Params::PerimeterEval(p) => perimeter_eval(p, &mut report)?,
        Params::FlatnessPipeline(p) => flatness_pipeline(p, &mut rng, &mut report)?,
        Params::SolveAndVerify(p) => solve_and_verify(p, calibration, &mut report)?,
    }
    Ok(report)
}

fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> Result<SpdMatrix> {
    let b: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect()).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| b[i][k] * b[j][k]).sum::<f64>() + if i == j { 0.5 } else { 0.0 })
                .collect()
        })
        .collect();
    SpdMatrix::from_rows(&rows)
}

fn kernel_check(p: &KernelCheckParams, rng: &mut ChaCha8Rng, report: &mut Report) -> Result<()> {
    let mut pairs = Table::new("pairs", &["n", "s", "distance", "closed_form", "quadrature", "relative_error"]);
    let mut tails = Table::new("tail", &["n", "s", "r", "numeric", "closed_form", "relative_error"]);
    let mut worst = 0.0f64;
    let mut worst_tail = 0.0f64;
    let mut worst_slope = 0.0f64;
    for &n in &p.dims {
        for &s in &p.s_values {
            let mut done = 0;
            while done < p.pairs {
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-p.extent..p.extent)).collect();
                let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-p.extent..p.extent)).collect();
                let g = if p.random_metric { random_spd(n, rng)? } else { SpdMatrix::identity(n) };
                if dist(&x, &y) < 1e-3 {
                    continue;
                }
                let k = kernel_constant(&g, &x, &y, s)?;
                let q = kernel_time_quadrature(&g, &x, &y, s)?;
                let rel = (k - q).abs() / k;
                worst = worst.max(rel);
                pairs.push(vec![n as f64, s, dist(&x, &y), k, q, rel]);
                done += 1;
            }
            let g = if p.random_metric { random_spd(n, rng)? } else { SpdMatrix::identity(n) };
            let y = vec![0.0; n];
            let mut logs = (Vec::new(), Vec::new());
            for &r in &p.tail_radii {
                let (shell, rem) = tail_integral_numeric(&y, r, s, &g, p.tail_outer)?;
                let exact = tail_integral_constant(&y, r, s, &g)?;
                let rel = (shell + rem - exact).abs() / exact;
                worst_tail = worst_tail.max(rel);
                tails.push(vec![n as f64, s, r, shell + rem, exact, rel]);
                logs.0.push(r.ln());
                logs.1.push((shell + rem).ln());
            }
            let (slope, _, _) = linear_fit(&logs.0, &logs.1);
            worst_slope = worst_slope.max((slope + s).abs());
        }
    }
    report.check(Check::le("kernel_max_relative_error", worst, p.tolerance));
    report.check(Check::le("tail_max_relative_error", worst_tail, p.tail_tolerance));
    report.check(Check::le("tail_slope_deviation", worst_slope, p.slope_tolerance));
    report.results = json!({
        "kernel_max_relative_error": worst,
        "tail_max_relative_error": worst_tail,
        "tail_slope_deviation": worst_slope,
        "pairs": pairs.rows.len(),
    });
    report.tables = vec![pairs, tails];
    Ok(())
}

fn heat_check(p: &HeatCheckParams, report: &mut Report) -> Result<()> {
    let euclid = MetricField::euclidean(1);
    let id = SpdMatrix::identity(1);
    let mut conv = Table::new("convergence", &["h", "max_error", "order", "max_mass"]);
    let mut errors = Vec::new();
    let mut max_mass = 0.0f64;
    for &h in &p.h_levels {
        let plan = SolvePlan {
            h,
            tau: h,
            theta: 0.5,
            padding: 4.0,
        };
        let f = solve_heat(&euclid, &plan, p.t, &[0.0], &Domain::WholeSpace)?;
        let mut err = 0.0f64;
        for &x in &p.probe_points {
            let v = f.value_at(&[x]).ok_or_else(|| Error::Geometry(format!("probe {x} outside the box")))?;
            err = err.max((v - heat_constant(&id, p.t, &[0.0], &[x])?).abs());
        }
        max_mass = max_mass.max(f.max_mass);
        errors.push((h, err, f.max_mass));
    }
    let mut min_order = f64::INFINITY;
    for (i, &(h, e, m)) in errors.iter().enumerate() {
        let order = if i == 0 {
            f64::NAN
        } else {
            let (h0, e0, _) = errors[i - 1];
            (e0 / e).ln() / (h0 / h).ln()
        };
        if i > 0 {
            min_order = min_order.min(order);
        }
        conv.push(vec![h, e, order, m]);
    }
    report.check(Check::ge("convergence_order", min_order, p.order_min));

    let (x, y) = (&p.symmetry_points.0, &p.symmetry_points.1);
    let sym = symmetry_residual(&p.metric, &p.symmetry_plan, p.symmetry_t, x, y)?;
    report.check(Check::le("symmetry_residual", sym, p.symmetry_tolerance));

    let duh = duhamel_difference(&p.metric, &[0.0], &p.duhamel_plan, p.duhamel_t)?;
    report.check(Check::le("duhamel_relative_gap", duh.relative_gap, p.duhamel_tolerance));

    let mut gauss = Table::new("gaussian_fit", &["n", "C", "c", "C_relative_error", "c_relative_error", "r2"]);
    let mut worst_c = 0.0f64;
    let mut worst_rate = 0.0f64;
    for &n in &p.gauss_dims {
        let origin = vec![0.0; n];
        let mut samples = Vec::new();
        for &t in &p.gauss_times {
            let f = solve_heat(&MetricField::euclidean(n), &p.gauss_plan, t, &origin, &Domain::WholeSpace)?;
            max_mass = max_mass.max(f.max_mass);
            samples.extend(GaussianSample::from_field(&f, 8.0, 1e-8));
        }
        let fit = gaussian_bound_fit(&samples, n, 2.0)?;
        let c_true = (4.0 * PI).powf(-(n as f64) / 2.0);
        let ec = (fit.big_c / c_true - 1.0).abs();
        let er = (fit.c / 0.25 - 1.0).abs();
        worst_c = worst_c.max(ec);
        worst_rate = worst_rate.max(er);
        gauss.push(vec![n as f64, fit.big_c, fit.c, ec, er, fit.r2]);
    }
    report.check(Check::le("gaussian_C_relative_error", worst_c, p.gauss_tolerance));
    report.check(Check::le("gaussian_c_relative_error", worst_rate, p.gauss_tolerance));

    let mut samples = Vec::new();
    for &t in &p.gauss_times {
        let f = solve_heat(&p.metric, &p.gauss_plan, t, &[0.0], &Domain::WholeSpace)?;
        max_mass = max_mass.max(f.max_mass);
        samples.extend(GaussianSample::from_field(&f, f64::INFINITY, 0.0));
    }
    let big_c = p.envelope.gauss_ratio * (4.0 * PI).powf(-0.5);
    let ratio = envelope_ratio(&samples, 1, big_c, p.envelope.gauss_c);
    report.check(Check::le("envelope_ratio", ratio, 1.0));
    report.check(Check::le("max_mass", max_mass, 1.0 + p.mass_tolerance));

    report.results = json!({
        "convergence_order": min_order,
        "symmetry_residual": sym,
        "duhamel_relative_gap": duh.relative_gap,
        "envelope_ratio": ratio,
        "envelope_samples": samples.len(),
        "max_mass": max_mass,
    });
    report.tables = vec![conv, gauss];
    Ok(())
}

fn estimate_sweep(p: &EstimateSweepParams, cal: Option<&Calibration>, report: &mut Report) -> Result<()> {
    let bound = cal.and_then(|c| {
        if (c.s - p.s).abs() > 1e-12 || c.n != p.metric.dim() {
            log::warn!("calibration is for (n, s) = ({}, {}); no bound applied", c.n, c.s);
            return None;
        }
        match p.estimate {
            EstimateKind::Effacement => Some(c.c_effacement),
            EstimateKind::DirichletGap => Some(c.c_dirichlet),
            EstimateKind::MeasureDifference => None,
        }
    });
    let rep = r_sweep(p.estimate, &p.metric, &p.radii, p.s, &p.plan, &p.budget, bound)?;
    let mut rows = Table::new("sweep", &["r", "value", "bound", "pass"]);
    for r in &rep.rows {
        rows.push(vec![r.r, r.value, r.bound.unwrap_or(f64::NAN), if r.pass { 1.0 } else { 0.0 }]);
    }
    let vanishing = rep.rows.iter().all(|r| r.value == 0.0);
    if vanishing {
        report.check(Check::flag("all_values_zero", true));
    } else {
        report.check(Check::le("slope_deviation", (rep.slope + p.s).abs(), p.slope_tolerance));
    }
    if bound.is_some() {
        report.check(Check::flag("dominated_by_bound", rep.rows.iter().all(|r| r.pass)));
    }
    let mut results = json!({
        "estimate": p.estimate,
        "slope": rep.slope,
        "r2": rep.r2,
        "fitted_constant": rep.fitted_constant,
        "bound_constant": bound,
    });
    report.tables = vec![rows];
    if p.estimate == EstimateKind::DirichletGap {
        let origin = vec![0.0; p.metric.dim()];
        let g = dirichlet_gap_series(&p.metric, &origin, 1.0, 0.5, &p.gap_plan, &p.gap_times)?;
        let mut t = Table::new("gap_series", &["t", "r2_over_t", "gap"]);
        for (tk, gk) in g.times.iter().zip(&g.gaps) {
            t.push(vec![*tk, 1.0 / tk, *gk]);
        }
        report.check(Check::le("gap_series_slope", g.slope, 0.0));
        report.check(Check::ge("gap_series_r2", g.r2, p.gap_r2_min));
        results["gap_series"] = json!({"slope": g.slope, "r2": g.r2, "min_difference": g.min_difference});
        report.tables.push(t);
    }
    report.results = results;
    Ok(())
}

fn nmc_eval(p: &NmcEvalParams, report: &mut Report) -> Result<()> {
    let n = p.region.dim();
    let g = p.metric.clone().unwrap_or_else(|| SpdMatrix::identity(n));
    let model = KernelModel::constant(g, p.s)?;
    let res = nmc_pv_with(&p.region, &p.point, &model, &p.pv)?;
    report.check(Check::flag("pv_converged", res.converged));
    if let Some(e) = p.expected {
        report.check(Check::le("deviation_from_expected", (res.value - e).abs(), p.tolerance));
    }
    let mut results = json!({
        "value": res.value,
        "near_field": res.near_field,
        "tail": res.tail,
        "route": res.route,
        "converged": res.converged,
    });
    if p.unpaired_directions > 0 {
        let u = nmc_unpaired(&p.region, &p.point, p.s, p.unpaired_directions, p.unpaired_delta)?;
        let reference = p.expected.unwrap_or(res.value);
        report.check(Check::le("unpaired_deviation", (u - reference).abs(), p.unpaired_tolerance));
        results["unpaired"] = json!(u);
    }
    let mut scal = Table::new("scaling", &["R", "value", "rescaled_reference", "normalized_gap"]);
    let mut worst = 0.0f64;
    for &r in &p.scalings {
        let y: Vec<f64> = p.point.iter().map(|v| v * r).collect();
        let v = nmc_pv_with(&p.region.scaled(r), &y, &model, &p.pv)?.value;
        let reference = r.powf(-p.s) * res.value;
        let gap = (v - reference).abs() / r.powf(-p.s);
        worst = worst.max(gap);
        scal.push(vec![r, v, reference, gap]);
    }
    if !p.scalings.is_empty() {
        report.check(Check::le("scaling_gap", worst, p.scaling_tolerance));
    }
    let mut seq = Table::new("delta_sequence", &["delta", "partial_value"]);
    for (d, v) in &res.delta_sequence {
        seq.push(vec![*d, *v]);
    }
    report.results = results;
    report.tables = vec![seq, scal];
    Ok(())
}

fn perimeter_eval(p: &PerimeterEvalParams, report: &mut Report) -> Result<()> {
    let n = p.region.dim();
    let g = p.metric.clone().unwrap_or_else(|| SpdMatrix::identity(n));
    let model = KernelModel::constant(g, p.s)?;
    let res = fractional_perimeter_with(&p.region, &p.center, p.radius, &model, &p.settings)?;
    report.check(Check::flag("converged", res.converged));
    if let Some(e) = p.expected {
        report.check(Check::le("relative_deviation", (res.value - e).abs() / e.abs(), p.tolerance));
    }
    let mut levels = Table::new("levels", &["level", "raw", "extrapolated"]);
    for (l, raw, ex) in &res.levels {
        levels.push(vec![*l as f64, *raw, *ex]);
    }
    report.results = json!({"value": res.value, "converged": res.converged});
    report.tables = vec![levels];
    Ok(())
}

fn flatness_table(rep: &FlatnessReport) -> Table {
    let mut t = Table::new(
        "flatness",
        &["l", "radius", "width", "count", "resolution", "fitted", "nu_0", "nu_1", "drift"],
    );
    for (i, sc) in rep.scales.iter().enumerate() {
        t.push(vec![
            sc.l as f64,
            sc.radius,
            sc.width,
            sc.count as f64,
            sc.resolution,
            if sc.fitted { 1.0 } else { 0.0 },
            sc.direction.first().copied().unwrap_or(f64::NAN),
            sc.direction.get(1).copied().unwrap_or(f64::NAN),
            rep.normals_drift.get(i).copied().unwrap_or(f64::NAN),
        ]);
    }
    t
}

fn flatness_json(rep: &FlatnessReport) -> serde_json::Value {
    json!({
        "alpha_fit": rep.alpha_fit,
        "alpha_fit_infinite": rep.alpha_fit == f64::INFINITY,
        "drift_constant": rep.drift_constant,
        "drift_within_envelope": rep.drift_within_envelope,
        "within_alpha_cylinders": rep.within_alpha_cylinders,
        "omitted": rep.omitted,
        "widths": rep.scales.iter().map(|s| s.width).collect::<Vec<_>>(),
    })
}

fn flatness_pipeline(p: &FlatnessPipelineParams, rng: &mut ChaCha8Rng, report: &mut Report) -> Result<()> {
    let f = |x: f64| p.profile.eval(&[x]);
    let xs = graded_abscissae(p.base, p.levels, p.per_shell, p.jitter.then_some(rng));
    let points: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x, f(x)]).collect();
    let base = vec![p.base, f(p.base)];
    let rep = dyadic_flatness_report_with(&points, &base, p.k_max, p.alpha, &p.settings)?;
    let need = p.min_alpha_fit.unwrap_or(p.alpha);
    report.check(Check::ge("alpha_fit", rep.alpha_fit, need));
    report.check(Check::flag("drift_within_envelope", rep.drift_within_envelope));
    report.results = flatness_json(&rep);
    report.tables = vec![flatness_table(&rep)];
    Ok(())
}

/// Deepest l ≤ cap whose hypothesis cylinder holds for every l' ≤ l.
pub(crate) fn hypothesis_depth(points: &[Vec<f64>], alpha: f64, cap: usize) -> Result<Option<usize>> {
    match dichotomy(points, 0.5, cap, alpha, 1.0) {
        Ok(_) => Ok(Some(cap)),
        Err(Error::Precondition { scale: 0, .. }) => Ok(None),
        Err(Error::Precondition { scale, .. }) => Ok(Some(scale - 1)),
        Err(e) => Err(e),
    }
}

fn solve_and_verify(p: &SolveAndVerifyParams, cal: Option<&Calibration>, report: &mut Report) -> Result<()> {
    let out = solve_minimal_graph_with(&p.exterior, p.s, &p.solver)?;
    let state = &out.state;
    report.check(Check::le("residual", state.residual, p.solver.tol));
    let mut sol = Table::new("solution", &["x", "f", "curvature"]);
    for ((x, f), h) in state.nodes().iter().zip(&state.profile.values).zip(&state.curvature) {
        sol.push(vec![*x, *f, *h]);
    }
    let mut trace = Table::new("trace", &["iteration", "tau", "residual"]);
    for r in &out.trace {
        trace.push(vec![r.iteration as f64, r.tau, r.residual]);
    }
    let mut results = json!({
        "converged": out.converged,
        "iterations": out.iterations,
        "residual": state.residual,
        "tau_cap": out.tau_cap,
        "rejected_steps": out.rejected_steps,
    });
    report.tables = vec![sol, trace];
    if !p.verify {
        report.results = results;
        return Ok(());
    }

    let region = state.region();
    let nodes = state.nodes();
    let m = nodes.len();
    let interior: Vec<Vec<f64>> = (1..m - 1).map(|i| vec![nodes[i], state.profile.values[i]]).collect();
    let r = p.viscosity_radius;
    let c0 = p.solver.tol * r.powf(p.s);
    let model = KernelModel::euclidean(2, p.s)?;
    let vs = ViscositySettings {
        pv: p.solver.pv,
        ..Default::default()
    };
    let visc = viscosity_bound_check_at(&region, &interior, c0, r, &model, &vs)?;
    report.check(Check::flag("viscosity_bound", visc.pass));
    let mut vt = Table::new("viscosity", &["x", "f", "interior_ball", "exterior_ball", "value", "pass"]);
    for t in &visc.points {
        let b = |v: bool| if v { 1.0 } else { 0.0 };
        vt.push(vec![t.point[0], t.point[1], b(t.interior_ball), b(t.exterior_ball), t.value, b(t.pass)]);
    }
    results["viscosity"] = json!({
        "c0": c0,
        "r": r,
        "bound": visc.bound,
        "tested": visc.points.len(),
        "skipped": visc.skipped,
        "max_abs_value": visc.points.iter().map(|t| t.value.abs()).fold(0.0, f64::max),
    });

    let alpha = p.alpha();
    let fb = state.profile.eval(p.base);
    let base = vec![p.base, fb];
    let points = state.boundary_points(p.base, p.levels, p.per_shell);
    let settings = FlatnessSettings {
        resolution: Some(
            (0..=p.k_max)
                .map(|l| state.interpolation_resolution(p.base, 0.5f64.powi(l as i32)))
                .collect(),
        ),
        ..Default::default()
    };
    let flat = dyadic_flatness_report_with(&points, &base, p.k_max, alpha, &settings)?;
    report.check(Check::ge("alpha_fit", flat.alpha_fit, p.min_alpha_factor * p.s));
    report.check(Check::flag("drift_within_envelope", flat.drift_within_envelope));
    results["flatness"] = flatness_json(&flat);
    report.tables.push(vt);
    report.tables.push(flatness_table(&flat));

    if p.harnack {
        match cal {
            None => {
                log::warn!("no calibration supplied; Harnack check skipped");
                results["harnack"] = json!({"skipped": "no calibration"});
            }
            Some(c) => {
                let shifted: Vec<Vec<f64>> = points.iter().map(|q| vec![q[0] - base[0], q[1] - base[1]]).collect();
                let depth = hypothesis_depth(&shifted, c.harnack_alpha, c.k0)?;
                let mut branches = Vec::new();
                let mut neither = false;
                if let Some(d) = depth {
                    for k in 0..=d {
                        let o = harnack_dichotomy_check(&shifted, c.delta_harnack, k, c.harnack_alpha, 1.0)?;
                        if o.branch == Branch::Neither {
                            log::error!("Harnack dichotomy fails at k = {k}: witnesses {:?}", o.witnesses);
                            neither = true;
                        }
                        branches.push(o.branch);
                    }
                }
                report.check(Check::flag("harnack_no_neither", !neither));
                results["harnack"] = json!({
                    "delta": c.delta_harnack,
                    "alpha": c.harnack_alpha,
                    "k0": c.k0,
                    "hypothesis_depth": depth,
                    "branches": branches,
                });
            }
        }
    }
    report.results = results;
    Ok(())
}
