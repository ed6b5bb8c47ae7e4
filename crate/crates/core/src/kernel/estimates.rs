use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::f64::consts::PI;

use super::numeric::lipschitz;
use super::{angular_factor, BudgetConstants};
use crate::error::{Error, Result};
use crate::geometry::{check_admissible, check_s, default_grid_for, MetricField, SpdMatrix};
use crate::heat::{duhamel_levels, paired_run, SolvePlan};
use crate::quad::{adaptive, gl, linear_fit};
use crate::special::cns;

/// t_max of the numeric window, in units of r².
const T_MAX_FACTOR: f64 = 16.0;

fn require_admissible(metric: &MetricField, y: &[f64], r: f64) -> Result<()> {
    if y.len() != metric.dim() {
        return Err(Error::Dimension {
            expected: metric.dim(),
            got: y.len(),
        });
    }
    let rep = check_admissible(metric, r, &default_grid_for(metric))?;
    if !rep.pass {
        return Err(Error::Inadmissible(format!(
            "ellipticity {:?}, r·‖Dg‖ = {}",
            rep.worst_ellipticity,
            r * rep.worst_lipschitz
        )));
    }
    Ok(())
}

/// ∫_a^b t^{-1-s/2} min(2, m√t) dt.
fn saturated_profile_integral(a: f64, b: f64, s: f64, m: f64) -> f64 {
    if m <= 0.0 || b <= a {
        return 0.0;
    }
    let knee = (2.0 / m).powi(2);
    let rising = |lo: f64, hi: f64| m * (hi.powf((1.0 - s) / 2.0) - lo.powf((1.0 - s) / 2.0)) * 2.0 / (1.0 - s);
    let flat = |lo: f64, hi: f64| {
        let upper = if hi.is_finite() { hi.powf(-s / 2.0) } else { 0.0 };
        4.0 / s * (lo.powf(-s / 2.0) - upper)
    };
    if b <= knee {
        rising(a, b)
    } else if a >= knee {
        flat(a, b)
    } else {
        rising(a, knee) + flat(knee, b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1Difference {
    /// numeric_part plus every budget entry.
    pub value: f64,
    /// ∫_box |∫_{t₀}^{t_max} t^{-1-s/2}(H − H_y) dt| dx.
    pub numeric_part: f64,
    pub small_t_budget: f64,
    pub large_t_budget: f64,
    /// Mass of H + H_y outside the box over (t₀, t_max).
    pub box_budget: f64,
    pub t0: f64,
    pub t_max: f64,
    pub lipschitz: f64,
}

/// ∫ |K(x,y) − K_y(x,y)| dx: the Duhamel difference H − H_y integrated in
/// time over (t₀, t_max) on the solver box, plus certified budgets for the
/// two time tails (from ‖H − H_y‖_{L¹} ≤ min(2, C‖Dg‖√t)) and the box.
pub fn kernel_l1_difference(
    metric: &MetricField,
    y: &[f64],
    r: f64,
    s: f64,
    plan: &SolvePlan,
    constants: &BudgetConstants,
) -> Result<L1Difference> {
    check_s(s)?;
    require_admissible(metric, y, r)?;
    let n = metric.dim();
    let t0 = (r / 4.0).powi(2);
    let t_max = T_MAX_FACTOR * r * r;
    let lip = lipschitz(metric)?;
    if metric.is_constant() || lip == 0.0 {
        return Ok(L1Difference {
            value: 0.0,
            numeric_part: 0.0,
            small_t_budget: 0.0,
            large_t_budget: 0.0,
            box_budget: 0.0,
            t0,
            t_max,
            lipschitz: lip,
        });
    }
    let weight = |t: f64| t.powf(-1.0 - s / 2.0);
    let mut acc: Vec<f64> = Vec::new();
    let mut prev: Option<(f64, Vec<f64>)> = None;
    let grid = duhamel_levels(metric, y, plan, 1e-5 * t0, t_max, &[t0], |t, w, _| {
        if t < t0 * (1.0 - 1e-12) {
            return;
        }
        if acc.is_empty() {
            acc = vec![0.0; w.len()];
        }
        let wt = weight(t);
        if let Some((tp, wp)) = &prev {
            let wtp = weight(*tp);
            let dt = 0.5 * (t - tp);
            for i in 0..w.len() {
                acc[i] += dt * (wt * w[i] + wtp * wp[i]);
            }
        }
        prev = Some((t, w.to_vec()));
    })?;
    let hn = grid.h.powi(n as i32);
    let numeric_part = acc.iter().map(|v| v.abs()).sum::<f64>() * hn;

    let m = constants.duhamel * lip;
    let small_t_budget = saturated_profile_integral(0.0, t0, s, m);
    let large_t_budget = saturated_profile_integral(t_max, f64::INFINITY, s, m);
    let reach = y
        .iter()
        .zip(grid.lower().iter().zip(grid.upper()))
        .map(|(v, (a, b))| (v - a).min(b - v))
        .fold(f64::INFINITY, f64::min);
    let outside = |t: f64| {
        let tail = 2.0 * n as f64 * constants.gauss_ratio * 2f64.powf(n as f64 / 2.0) * erfc(reach / (8.0 * t).sqrt());
        weight(t) * tail.min(m * t.sqrt())
    };
    let (la, lb) = (t0.ln(), t_max.ln());
    let box_budget: f64 = (0..16)
        .map(|k| {
            let a = la + (lb - la) * k as f64 / 16.0;
            let b = la + (lb - la) * (k + 1) as f64 / 16.0;
            gl(16).integrate(a, b, |u| outside(u.exp()) * u.exp())
        })
        .sum();
    Ok(L1Difference {
        value: numeric_part + small_t_budget + large_t_budget + box_budget,
        numeric_part,
        small_t_budget,
        large_t_budget,
        box_budget,
        t0,
        t_max,
        lipschitz: lip,
    })
}

/// max over t ∈ [t_end·1e-3, t_end] of ‖H(t,·,y) − H_y(t,·,y)‖_{L¹} / (‖Dg‖√t),
/// the smallest Duhamel constant consistent with one run.
pub fn duhamel_constant(metric: &MetricField, y: &[f64], plan: &SolvePlan, t_end: f64) -> Result<f64> {
    let lip = lipschitz(metric)?;
    if metric.is_constant() || lip == 0.0 {
        return Ok(0.0);
    }
    let n = metric.dim();
    let t_min = 1e-3 * t_end;
    let mut worst = 0.0f64;
    duhamel_levels(metric, y, plan, 1e-5 * t_min, t_end, &[t_min], |t, w, grid| {
        if t >= t_min * (1.0 - 1e-12) {
            let l1 = w.iter().map(|v| v.abs()).sum::<f64>() * grid.h.powi(n as i32);
            worst = worst.max(l1 / (lip * t.sqrt()));
        }
    })?;
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureDifference {
    /// near_field + tail.
    pub value: f64,
    /// ∫_{B_r(y)} K_y(x,y)|√|g(x)| − √|g(y)|| dx by quadrature.
    pub near_field: f64,
    /// sup|√|g| − √|g(y)|| · ∫_{CB_r(y)} K_y dx.
    pub tail: f64,
    /// Sampled sup of |√|g(x)| − √|g(y)||.
    pub density_oscillation: f64,
}

/// ∫ K_y(x,y)|dV(x) − √|g(y)| dx| split at the Euclidean ball B_r(y).
pub fn measure_difference_integral(metric: &MetricField, y: &[f64], r: f64, s: f64) -> Result<MeasureDifference> {
    check_s(s)?;
    require_admissible(metric, y, r)?;
    let n = metric.dim();
    if metric.is_constant() {
        return Ok(MeasureDifference {
            value: 0.0,
            near_field: 0.0,
            tail: 0.0,
            density_oscillation: 0.0,
        });
    }
    if n > 2 {
        return Err(Error::UnsupportedDimension(n));
    }
    let gy: SpdMatrix = metric.eval(y);
    let sy = gy.sqrt_det();
    let c = cns(n, s);
    let nf = n as f64;
    // Along θ, ρ = r u^p with p = 1/(1−s) absorbs the ρ^{-s} singularity.
    let p = 1.0 / (1.0 - s);
    let radial = |th: &[f64]| {
        let a = gy.norm(th);
        let f = |u: f64| {
            if u <= 0.0 {
                return 0.0;
            }
            let rho = r * u.powf(p);
            let x: Vec<f64> = y.iter().zip(th).map(|(v, w)| v + rho * w).collect();
            let diff = (metric.volume_density(&x) - sy).abs();
            c * (rho * a).powf(-(nf + s)) * diff * rho.powi(n as i32 - 1) * r * p * u.powf(p - 1.0)
        };
        let pts: Vec<f64> = (0..=8).map(|k| k as f64 / 8.0).collect();
        adaptive(f, &pts, 1e-13, 1e-10, 2000).value
    };
    let near_field = if n == 1 {
        radial(&[1.0]) + radial(&[-1.0])
    } else {
        let rule = gl(24);
        (0..16)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / 16.0;
                rule.integrate(a, a + PI / 8.0, |t| radial(&[t.cos(), t.sin()]))
            })
            .sum()
    };
    let grid = default_grid_for(metric);
    let density_oscillation = grid
        .points()?
        .iter()
        .map(|x| (metric.volume_density(x) - sy).abs())
        .fold(0.0, f64::max);
    let tail = density_oscillation * c * angular_factor(&gy, s)? * r.powf(-s) / s;
    Ok(MeasureDifference {
        value: near_field + tail,
        near_field,
        tail,
        density_oscillation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletKernelGap {
    /// numeric_part + tail.
    pub value: f64,
    /// sup_x ∫_0^{r²} t^{-1-s/2} ∫_{B_ρ(p)} (H − H_{B_r(p)})(t,x,y) dV(y) dt.
    pub numeric_part: f64,
    /// (2/s) r^{-s}, from mass ≤ 1 for t > r².
    pub tail: f64,
    /// Node attaining the sup.
    pub argmax: Vec<f64>,
    /// Smallest time-integrated gap over B_r(p) (≥ 0 up to roundoff).
    pub min_gap: f64,
}

/// sup over x ∈ B_r(p) of ∫_{B_ρ(p)} |K − K_{B_r(p)}|(x,y) dV(y).
pub fn dirichlet_kernel_gap(
    metric: &MetricField,
    p: &[f64],
    r: f64,
    rho: f64,
    s: f64,
    plan: &SolvePlan,
) -> Result<DirichletKernelGap> {
    check_s(s)?;
    let t_end = r * r;
    let weight = |t: f64| t.powf(-1.0 - s / 2.0);
    let mut acc: Vec<f64> = Vec::new();
    let mut prev: Option<(f64, Vec<f64>)> = None;
    let mut best = (f64::NEG_INFINITY, Vec::new());
    let mut min_gap = f64::INFINITY;
    paired_run(metric, p, r, rho, plan, &[t_end], |t, u, v, grid, active| {
        if acc.is_empty() {
            acc = vec![0.0; u.len()];
        }
        let d: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - b).collect();
        let wt = weight(t);
        let (tp, wp) = match &prev {
            Some((tp, dp)) => (*tp, Some(dp)),
            None => (0.0, None),
        };
        let wtp = if tp > 0.0 { weight(tp) } else { 0.0 };
        for i in 0..d.len() {
            let before = wp.map_or(0.0, |dp| wtp * dp[i]);
            acc[i] += 0.5 * (t - tp) * (wt * d[i] + before);
        }
        prev = Some((t, d));
        if (t - t_end).abs() <= 1e-13 * t_end {
            for i in 0..acc.len() {
                if active[i] {
                    if acc[i] > best.0 {
                        best = (acc[i], grid.coords(i));
                    }
                    min_gap = min_gap.min(acc[i]);
                }
            }
        }
    })?;
    let tail = 2.0 / s * r.powf(-s);
    Ok(DirichletKernelGap {
        value: best.0 + tail,
        numeric_part: best.0,
        tail,
        argmax: best.1,
        min_gap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    Effacement,
    MeasureDifference,
    DirichletGap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub r: f64,
    pub value: f64,
    /// C·r^{-s} when a constant is supplied.
    pub bound: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub kind: EstimateKind,
    pub s: f64,
    pub rows: Vec<SweepRow>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// max_r value·r^s over the sweep.
    pub fitted_constant: f64,
}

/// Evaluates an estimate over radii `rs` on the saturated family
/// g_r(x) = base(x/r) at the origin (r‖Dg_r‖ = ‖D base‖ for every r), and
/// fits log value against log r. Dirichlet gaps use ρ = r/2.
pub fn r_sweep(
    kind: EstimateKind,
    base: &MetricField,
    rs: &[f64],
    s: f64,
    plan: &SolvePlan,
    constants: &BudgetConstants,
    bound_constant: Option<f64>,
) -> Result<SweepReport> {
    if rs.len() < 2 {
        return Err(Error::InsufficientSamples("an r-sweep needs at least two radii".into()));
    }
    let origin = vec![0.0; base.dim()];
    let mut rows = Vec::with_capacity(rs.len());
    for &r in rs {
        let metric = base.clone().rescaled(r);
        let value = match kind {
            EstimateKind::Effacement => kernel_l1_difference(&metric, &origin, r, s, plan, constants)?.value,
            EstimateKind::MeasureDifference => measure_difference_integral(&metric, &origin, r, s)?.near_field,
            EstimateKind::DirichletGap => dirichlet_kernel_gap(&metric, &origin, r, 0.5 * r, s, plan)?.value,
        };
        let bound = bound_constant.map(|c| c * r.powf(-s));
        rows.push(SweepRow {
            r,
            value,
            bound,
            pass: bound.is_none_or(|b| value <= b),
        });
    }
    let fitted_constant = rows.iter().map(|w| w.value * w.r.powf(s)).fold(0.0, f64::max);
    let (slope, intercept, r2) = if rows.iter().all(|w| w.value > 0.0) {
        let xs: Vec<f64> = rows.iter().map(|w| w.r.ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|w| w.value.ln()).collect();
        linear_fit(&xs, &ys)
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };
    Ok(SweepReport {
        kind,
        s,
        rows,
        slope,
        intercept,
        r2,
        fitted_constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::dist;

    #[test]
    fn saturated_integral_matches_quadrature() {
        let (s, m) = (0.5, 0.7);
        let f = |t: f64| t.powf(-1.0 - s / 2.0) * (2.0f64).min(m * t.sqrt());
        let q = adaptive(f, &[0.01, (2.0 / m).powi(2), 50.0], 0.0, 1e-12, 500).value;
        assert!((saturated_profile_integral(0.01, 50.0, s, m) - q).abs() < 1e-9);
        let head = adaptive(f, &[1e-12, 1e-8, 1e-4, 0.01], 0.0, 1e-12, 500).value;
        assert!((saturated_profile_integral(1e-12, 0.01, s, m) - head).abs() < 1e-8);
    }

    #[test]
    fn constant_metric_estimates_vanish() {
        let g = MetricField::constant(SpdMatrix::scaled_identity(1, 1.3).unwrap());
        let plan = SolvePlan::default();
        let d = kernel_l1_difference(&g, &[0.2], 1.0, 0.5, &plan, &BudgetConstants::default()).unwrap();
        assert_eq!(d.value, 0.0);
        let m = measure_difference_integral(&g, &[0.2], 1.0, 0.5).unwrap();
        assert_eq!(m.value, 0.0);
    }

    #[test]
    fn inadmissible_metric_rejected() {
        let g = MetricField::sinusoidal_1d(0.3, 4.0, 0.0);
        let e = measure_difference_integral(&g, &[0.0], 1.0, 0.5);
        assert!(matches!(e, Err(Error::Inadmissible(_))));
    }

    #[test]
    fn measure_difference_scales_on_saturated_family() {
        let base = MetricField::sinusoidal_1d(0.3, 1.0, 0.7);
        let a = measure_difference_integral(&base.clone().rescaled(1.0), &[0.0], 1.0, 0.5).unwrap();
        let b = measure_difference_integral(&base.rescaled(0.25), &[0.0], 0.25, 0.5).unwrap();
        assert!((b.near_field / a.near_field - 2.0).abs() < 1e-6);
        assert!(a.near_field > 0.0);
    }

    #[test]
    fn dirichlet_gap_nonnegative_and_decreasing_in_r() {
        let g = MetricField::euclidean(1);
        let plan = SolvePlan {
            h: 1.0 / 128.0,
            tau: 1.0 / 256.0,
            theta: 0.5,
            padding: 4.0,
        };
        let a = dirichlet_kernel_gap(&g, &[0.0], 1.0, 0.25, 0.5, &plan).unwrap();
        let b = dirichlet_kernel_gap(&g, &[0.0], 2.0, 0.25, 0.5, &plan).unwrap();
        assert!(a.min_gap >= -1e-12);
        assert!(b.value < a.value);
        assert!(dist(&a.argmax, &[0.0]) <= 1.0);
    }
}
