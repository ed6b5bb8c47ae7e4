//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Reference values are computed here, independently of the library:
//! time quadratures of the Gaussian, closed forms through the gamma
//! function, and a least-squares fit of our own.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::gamma;

use fracflat::flatness::{frac_laplacian_graph, frac_laplacian_graph_with, Growth};
use fracflat::geometry::{GraphProfile, MetricField, RegionSpec, SpdMatrix};
use fracflat::harness::{
    calibrate, run, Calibration, CalibrationConfig, EstimateSweepParams, ExperimentConfig, ExperimentKind, Params,
    Report,
};
use fracflat::heat::{dirichlet_gap_series, gaussian_bound_fit, solve_heat, Domain, GaussianSample, SolvePlan};
use fracflat::kernel::{kernel_constant, r_sweep, tail_integral_numeric, BudgetConstants, EstimateKind, KernelModel};
use fracflat::nmc::{nmc_pv, nmc_unpaired};

/// H_s(B_1) at a boundary point, n = 2, s = 1/2, from the refinement-doubling run.
const BALL_GOLDEN: f64 = -6.052062693682955;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn cns(n: usize, s: f64) -> f64 {
    2f64.powf(s) * PI.powf(-(n as f64) / 2.0) * gamma((n as f64 + s) / 2.0)
}

fn sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma(n as f64 / 2.0)
}

/// Slope, intercept and R² of the least-squares line through (x, y).
fn fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}

fn log_slope(r: &[f64], v: &[f64]) -> f64 {
    let lr: Vec<f64> = r.iter().map(|x| x.ln()).collect();
    let lv: Vec<f64> = v.iter().map(|x| x.ln()).collect();
    fit(&lr, &lv).0
}

/// ∫_0^∞ t^{-1-s/2} (4πt)^{-n/2} e^{-q/4t} dt by the trapezoid rule in ln t.
fn kernel_by_time_quadrature(n: usize, s: f64, q: f64) -> f64 {
    let nf = n as f64;
    let (lo, hi, dv) = (q.ln() - 8.0, q.ln() + 90.0, 0.01);
    let steps = ((hi - lo) / dv).ceil() as usize;
    let mut acc = 0.0;
    for k in 0..=steps {
        let t = (lo + k as f64 * dv).exp();
        let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
        acc += w * t.powf(-s / 2.0) * (4.0 * PI * t).powf(-nf / 2.0) * (-q / (4.0 * t)).exp();
    }
    acc * dv
}

fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> SpdMatrix {
    let b: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| b[i][k] * b[j][k]).sum::<f64>() + if i == j { 0.5 } else { 0.0 })
                .collect()
        })
        .collect();
    SpdMatrix::from_rows(&rows).unwrap()
}

fn a1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let mut count = 0;
    for n in [1usize, 2] {
        for s in [0.3, 0.5, 0.7] {
            for _ in 0..20 {
                let g = random_spd(n, &mut rng);
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let d: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
                let q: f64 = (0..n).map(|i| (0..n).map(|j| d[i] * g.get(i, j) * d[j]).sum::<f64>()).sum();
                let k = kernel_constant(&g, &x, &y, s).unwrap();
                let oracle = kernel_by_time_quadrature(n, s, q);
                worst = worst.max((k - oracle).abs() / oracle);
                count += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-6 && secs < 5.0 && count == 120,
        format!("{count} pairs, max relative error {worst:.2e} (<= 1e-6), {secs:.2} s (< 5 s)"),
    )
}

fn a2() -> Outcome {
    let radii = [1.0, 0.5, 0.25, 0.125];
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut worst, mut worst_slope) = (0.0f64, 0.0f64);
    for n in [1usize, 2] {
        for s in [0.3, 0.5, 0.7] {
            for g in [SpdMatrix::identity(n), random_spd(n, &mut rng)] {
                let y = vec![0.0; n];
                let mut vals = Vec::new();
                for &r in &radii {
                    let (shell, rem) = tail_integral_numeric(&y, r, s, &g, 1e8).unwrap();
                    let exact = sphere_area(n) * cns(n, s) * r.powf(-s) / s;
                    worst = worst.max((shell + rem - exact).abs() / exact);
                    vals.push(shell + rem);
                }
                worst_slope = worst_slope.max((log_slope(&radii, &vals) + s).abs());
            }
        }
    }
    outcome(
        worst <= 1e-4 && worst_slope <= 0.02,
        format!("max relative error {worst:.2e} (<= 1e-4), slope deviation {worst_slope:.2e} (<= 0.02)"),
    )
}

fn a3() -> Outcome {
    let half = RegionSpec::HalfSpace {
        normal: vec![0.0, 1.0],
        offset: 0.0,
    };
    let (mut paired, mut unpaired) = (0.0f64, 0.0f64);
    let mut converged = true;
    for s in [0.3, 0.5, 0.7] {
        for y in [[0.0, 0.0], [0.37, 0.0], [-1.5, 0.0]] {
            let r = nmc_pv(&half, &y, &KernelModel::euclidean(2, s).unwrap()).unwrap();
            converged &= r.converged;
            paired = paired.max(r.value.abs());
        }
    }
    for s in [0.3, 0.5, 0.7] {
        let u = nmc_unpaired(&half, &[0.0, 0.0], s, 65537, 0.05).unwrap();
        unpaired = unpaired.max(u.abs());
    }
    outcome(
        converged && paired <= 1e-6 && unpaired <= 1e-3,
        format!("paired max |H| {paired:.2e} (<= 1e-6), unpaired max |H| {unpaired:.2e} (<= 1e-3)"),
    )
}

fn a4() -> Outcome {
    let s = 0.5;
    // pair each inward direction at angle φ from the normal with its antipode:
    // H(B_1) = −(2/s) Cns ∫_{−π/2}^{π/2} (2 cos φ)^{-s} dφ
    let beta = gamma(0.5) * gamma((1.0 - s) / 2.0) / gamma(1.0 - s / 2.0);
    let closed = -(2.0 / s) * cns(2, s) * 2f64.powf(-s) * beta;
    let golden_ok = (closed - BALL_GOLDEN).abs() <= 1e-9 * BALL_GOLDEN.abs();
    let model = KernelModel::euclidean(2, s).unwrap();
    let mut worst = 0.0f64;
    for big_r in [1.0, 0.5, 2.0] {
        let ball = RegionSpec::Ball {
            center: vec![0.0, 0.0],
            radius: big_r,
            inside: true,
        };
        let h = nmc_pv(&ball, &[big_r, 0.0], &model).unwrap().value;
        let scale = big_r.powf(-s);
        worst = worst.max((h - scale * BALL_GOLDEN).abs() / scale);
    }
    outcome(
        golden_ok && worst <= 1e-3,
        format!(
            "golden {BALL_GOLDEN:.12} vs closed form {closed:.12}; max |H(B_R) - R^-s H(B_1)| R^s = {worst:.2e} (<= 1e-3)"
        ),
    )
}

fn sweep_defaults() -> EstimateSweepParams {
    EstimateSweepParams::default()
}

fn a5(cal: &Calibration) -> Outcome {
    let start = Instant::now();
    let p = sweep_defaults();
    let rep = r_sweep(
        EstimateKind::Effacement,
        &p.metric,
        &p.radii,
        p.s,
        &p.plan,
        &BudgetConstants::default(),
        Some(cal.c_effacement),
    )
    .unwrap();
    let r: Vec<f64> = rep.rows.iter().map(|x| x.r).collect();
    let v: Vec<f64> = rep.rows.iter().map(|x| x.value).collect();
    let slope = log_slope(&r, &v);
    let dominated = rep.rows.iter().all(|x| x.value <= cal.c_effacement * x.r.powf(-p.s));
    let secs = start.elapsed().as_secs_f64();
    outcome(
        (slope + p.s).abs() <= 0.15 && dominated && secs <= 600.0,
        format!(
            "slope {slope:.4} (-s +- 0.15), dominated by {:.4} r^-s: {dominated}, {secs:.1} s",
            cal.c_effacement
        ),
    )
}

fn a6() -> Outcome {
    let p = sweep_defaults();
    let rep = r_sweep(
        EstimateKind::MeasureDifference,
        &p.metric,
        &p.radii,
        p.s,
        &p.plan,
        &BudgetConstants::default(),
        None,
    )
    .unwrap();
    let r: Vec<f64> = rep.rows.iter().map(|x| x.r).collect();
    let v: Vec<f64> = rep.rows.iter().map(|x| x.value).collect();
    let positive = v.iter().all(|x| *x > 0.0);
    let slope = log_slope(&r, &v);
    outcome(
        positive && (slope + p.s).abs() <= 0.15,
        format!("slope {slope:.4} (-s +- 0.15), smallest value {:.3e}", v.iter().cloned().fold(f64::INFINITY, f64::min)),
    )
}

fn a7() -> Outcome {
    let p = sweep_defaults();
    let g = dirichlet_gap_series(&p.metric, &[0.0], 1.0, 0.5, &p.gap_plan, &p.gap_times).unwrap();
    let x: Vec<f64> = p.gap_times.iter().map(|t| 1.0 / t).collect();
    let y: Vec<f64> = g.gaps.iter().map(|v| v.ln()).collect();
    let (gap_slope, _, r2) = fit(&x, &y);
    let rep = r_sweep(
        EstimateKind::DirichletGap,
        &p.metric,
        &p.radii,
        p.s,
        &p.plan,
        &BudgetConstants::default(),
        None,
    )
    .unwrap();
    let r: Vec<f64> = rep.rows.iter().map(|x| x.r).collect();
    let v: Vec<f64> = rep.rows.iter().map(|x| x.value).collect();
    let slope = log_slope(&r, &v);
    outcome(
        gap_slope < 0.0 && r2 >= 0.95 && (slope + p.s).abs() <= 0.15,
        format!("log gap vs r^2/t: slope {gap_slope:.4} (< 0), R^2 {r2:.4} (>= 0.95); kernel gap slope {slope:.4} (-s +- 0.15)"),
    )
}

fn heat_report() -> Report {
    run(&ExperimentConfig::new(ExperimentKind::HeatCheck, 0, "unused"), None).unwrap()
}

fn check_line(rep: &Report, name: &str) -> (bool, String) {
    match rep.find(name) {
        Some(c) => (c.pass, format!("{name} {:.3e} {} {:e}", c.value, c.relation, c.threshold)),
        None => (false, format!("{name} missing")),
    }
}

fn a8(heat: &Report) -> Outcome {
    let t = 0.25;
    let probes = [0.0, 0.25, 0.5, 1.0];
    let exact = |x: f64| (4.0 * PI * t).powf(-0.5) * (-x * x / (4.0 * t)).exp();
    let mut errors = Vec::new();
    let mut max_mass = 0.0f64;
    for h in [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0] {
        let plan = SolvePlan {
            h,
            tau: h,
            theta: 0.5,
            padding: 4.0,
        };
        let f = solve_heat(&MetricField::euclidean(1), &plan, t, &[0.0], &Domain::WholeSpace).unwrap();
        max_mass = max_mass.max(f.max_mass);
        let e = probes
            .iter()
            .map(|&x| (f.value_at(&[x]).unwrap() - exact(x)).abs())
            .fold(0.0, f64::max);
        errors.push(e);
    }
    let order = errors.windows(2).map(|w| (w[0] / w[1]).log2()).fold(f64::INFINITY, f64::min);
    let (sym_ok, sym) = check_line(heat, "symmetry_residual");
    let (duh_ok, duh) = check_line(heat, "duhamel_relative_gap");
    let (mass_ok, mass) = check_line(heat, "max_mass");
    let sym_value = heat.find("symmetry_residual").map_or(f64::NAN, |c| c.value);
    outcome(
        order >= 1.8 && max_mass <= 1.0 + 1e-10 && mass_ok && sym_ok && sym_value <= 1e-6 && duh_ok,
        format!("observed order {order:.3} (>= 1.8), {mass}, {sym}, {duh}"),
    )
}

fn a9(heat: &Report) -> Outcome {
    let plan = SolvePlan {
        h: 1.0 / 32.0,
        tau: 1.0 / 32.0,
        theta: 0.5,
        padding: 2.0,
    };
    let (mut worst_c, mut worst_rate) = (0.0f64, 0.0f64);
    for n in [1usize, 2] {
        let mut samples = Vec::new();
        for t in [0.05, 0.1, 0.2] {
            let f = solve_heat(&MetricField::euclidean(n), &plan, t, &vec![0.0; n], &Domain::WholeSpace).unwrap();
            samples.extend(GaussianSample::from_field(&f, 8.0, 1e-8));
        }
        let fit = gaussian_bound_fit(&samples, n, 2.0).unwrap();
        worst_c = worst_c.max((fit.big_c / (4.0 * PI).powf(-(n as f64) / 2.0) - 1.0).abs());
        worst_rate = worst_rate.max((fit.c / 0.25 - 1.0).abs());
    }
    let (env_ok, env) = check_line(heat, "envelope_ratio");
    outcome(
        worst_c <= 0.05 && worst_rate <= 0.05 && env_ok,
        format!("C relative error {worst_c:.3} (<= 0.05), c relative error {worst_rate:.3} (<= 0.05), {env}"),
    )
}

fn a10() -> Outcome {
    let s = 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst_linear = 0.0f64;
    for k in 0..10 {
        let d = 1 + k % 2;
        let a: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b: f64 = rng.gen_range(-1.0..1.0);
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c = a.iter().map(|v| v.abs()).sum::<f64>() + b.abs() + 1.0;
        let f = |z: &[f64]| a.iter().zip(z).map(|(p, q)| p * q).sum::<f64>() + b;
        let v = frac_laplacian_graph(&f, s, &x, Growth { alpha: 0.25, c }).unwrap();
        worst_linear = worst_linear.max(v.abs());
    }
    // cos(kx) is an eigenfunction: L cos(k·) = −2 |k|^{1+s} ∫_0^∞ (1 − cos u) u^{-2-s} du · cos(k·)
    let beta = 1.0 + s;
    let symbol = -gamma(2.0 - beta) / ((-beta) * (1.0 - beta)) * (PI * beta / 2.0).cos();
    let growth = Growth { alpha: 0.25, c: 4.0 };
    let f = |z: &[f64]| (2.0 * z[0]).cos();
    let g = |z: &[f64]| (0.5 * z[0] + 0.3).sin();
    let fg = |z: &[f64]| f(z) - 3.0 * g(z);
    let x = [0.4];
    let lf = frac_laplacian_graph_with(&f, s, &x, growth, 1e-10).unwrap().value;
    let lg = frac_laplacian_graph_with(&g, s, &x, growth, 1e-10).unwrap().value;
    let lfg = frac_laplacian_graph_with(&fg, s, &x, growth, 1e-10).unwrap().value;
    let linearity = (lfg - (lf - 3.0 * lg)).abs();
    let expected = -2.0 * 2f64.powf(beta) * symbol * (2.0 * x[0]).cos();
    let eigen = (lf - expected).abs() / expected.abs();
    outcome(
        worst_linear <= 1e-6 && linearity <= 1e-6 && eigen <= 1e-4,
        format!(
            "10 linear functions max |L f| {worst_linear:.2e} (<= 1e-6), linearity defect {linearity:.2e}, cosine eigenvalue relative error {eigen:.2e}"
        ),
    )
}

fn solve_config(exterior: Option<GraphProfile>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(ExperimentKind::SolveAndVerify, 0, "unused");
    if let (Params::SolveAndVerify(p), Some(e)) = (&mut cfg.params, exterior) {
        p.exterior = e;
    }
    cfg
}

fn a11(cal: &Calibration) -> (Outcome, Report) {
    let start = Instant::now();
    let cfg = solve_config(None);
    let rep = run(&cfg, Some(cal)).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let Params::SolveAndVerify(p) = &cfg.params else { unreachable!() };
    let mut pass = p.s == 0.5 && p.solver.tol == 1e-3 && p.k_max == 4 && p.min_alpha_factor == 0.5;
    let mut parts = Vec::new();
    for name in ["residual", "viscosity_bound", "alpha_fit", "drift_within_envelope"] {
        let (ok, line) = check_line(&rep, name);
        pass &= ok;
        parts.push(line);
    }
    let alpha_fit = rep.find("alpha_fit").map_or(f64::NAN, |c| c.value);
    pass &= alpha_fit >= 0.5 * p.s && secs <= 900.0;
    parts.push(format!("{secs:.1} s (<= 900 s)"));
    (outcome(pass, parts.join(", ")), rep)
}

fn a12(cal: &Calibration, first: &Report) -> Outcome {
    let others = [GraphProfile::sine_1d(0.03, 3.0, 0.5), GraphProfile::sine_1d(0.06, 1.0, 1.0)];
    let mut reports = vec![first.clone()];
    for e in others {
        reports.push(run(&solve_config(Some(e)), Some(cal)).unwrap());
    }
    let mut pass = true;
    let mut checked = 0;
    for r in &reports {
        let converged = r.results["converged"].as_bool() == Some(true);
        let no_neither = r.find("harnack_no_neither").is_some_and(|c| c.pass);
        let branches = r.results["harnack"]["branches"].as_array().map_or(0, |b| b.len());
        pass &= converged && no_neither && branches > 0;
        checked += branches;
    }
    outcome(
        pass,
        format!(
            "{} solver outputs, {checked} dichotomy calls at delta {}, none returned neither",
            reports.len(),
            cal.delta_harnack
        ),
    )
}

fn line(id: &'static str, o: Outcome, results: &mut Vec<(&'static str, Outcome)>) {
    println!("{id} {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    results.push((id, o));
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    line("A1", a1(), &mut results);
    line("A2", a2(), &mut results);
    line("A3", a3(), &mut results);
    line("A4", a4(), &mut results);
    let cal = calibrate(&CalibrationConfig::default(), 0).expect("calibration");
    line("A5", a5(&cal), &mut results);
    line("A6", a6(), &mut results);
    line("A7", a7(), &mut results);
    let heat = heat_report();
    line("A8", a8(&heat), &mut results);
    line("A9", a9(&heat), &mut results);
    line("A10", a10(), &mut results);
    let (o, solved) = a11(&cal);
    line("A11", o, &mut results);
    line("A12", a12(&cal, &solved), &mut results);
    let failed: Vec<&str> = results.iter().filter(|(_, o)| !o.pass).map(|(id, _)| *id).collect();
    if failed.is_empty() {
        println!("acceptance: {} of {} criteria pass", results.len(), results.len());
    } else {
        println!("acceptance: failed {}", failed.join(", "));
        std::process::exit(1);
    }
}
