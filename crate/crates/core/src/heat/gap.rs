use serde::{Deserialize, Serialize};

use super::{check_ellipticity, plan_times_with, Discretization, HeatGrid, SolvePlan};
use crate::error::{invalid, Error, Result};
use crate::geometry::{dist, MetricField};
use crate::quad::linear_fit;

/// sup_x ∫_{V_ρ} (H − H_{V_r}) over a time series, with the fit of
/// log(gap) against r²/t.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapSeries {
    pub r: f64,
    pub rho: f64,
    pub times: Vec<f64>,
    pub gaps: Vec<f64>,
    /// Smallest nodal value of H − H_{V_r} seen (≥ 0 up to roundoff).
    pub min_difference: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

fn check_geometry(p: &[f64], r: f64, rho: f64, metric: &MetricField) -> Result<()> {
    if p.len() != metric.dim() {
        return Err(Error::Dimension {
            expected: metric.dim(),
            got: p.len(),
        });
    }
    if !(rho > 0.0) || !(rho < r) {
        return Err(Error::Geometry(format!("need 0 < rho < r, got rho = {rho}, r = {r}")));
    }
    Ok(())
}

/// Evolves χ_{B_ρ(p)} twice on one lattice, in a padded box and with
/// Dirichlet data on ∂B_r(p), calling `observe(t, whole, dirichlet, grid)`
/// at every level. Requested `times` are hit exactly.
pub(crate) fn paired_run(
    metric: &MetricField,
    p: &[f64],
    r: f64,
    rho: f64,
    plan: &SolvePlan,
    times: &[f64],
    mut observe: impl FnMut(f64, &[f64], &[f64], &HeatGrid, &[bool]),
) -> Result<()> {
    plan.validate()?;
    check_geometry(p, r, rho, metric)?;
    let t_max = times.iter().cloned().fold(0.0, f64::max);
    if !(t_max > 0.0) {
        return Err(invalid("t", "must be positive"));
    }
    let pad = r + plan.padding * SolvePlan::diffusion_length(t_max) + 2.0 * plan.h;
    let lower: Vec<f64> = p.iter().map(|c| c - pad).collect();
    let upper: Vec<f64> = p.iter().map(|c| c + pad).collect();
    let grid = HeatGrid::covering(&lower, &upper, plan.h);
    check_ellipticity(metric, &grid)?;
    let mut whole = Discretization::new(metric, grid.clone(), |_| true)?;
    let pc = p.to_vec();
    let mut inner = Discretization::new(metric, grid.clone(), move |x| dist(x, &pc) < r * (1.0 - 1e-12))?;
    let init: Vec<f64> = (0..grid.len())
        .map(|i| if dist(&grid.coords(i), p) < rho { 1.0 } else { 0.0 })
        .collect();
    let mut u = init.clone();
    let mut v: Vec<f64> = init
        .iter()
        .zip(&inner.active)
        .map(|(a, &on)| if on { *a } else { 0.0 })
        .collect();
    let levels = plan_times_with(plan, t_max, times);
    let mut t = 0.0;
    for (k, &tn) in levels.iter().enumerate() {
        let th = if k < 4 { 1.0 } else { plan.theta };
        whole.step(&mut u, tn - t, th, None)?;
        inner.step(&mut v, tn - t, th, None)?;
        t = tn;
        observe(t, &u, &v, &grid, &inner.active);
    }
    Ok(())
}

/// Gap series at the requested times (each t ≤ r²).
pub fn dirichlet_gap_series(
    metric: &MetricField,
    p: &[f64],
    r: f64,
    rho: f64,
    plan: &SolvePlan,
    times: &[f64],
) -> Result<GapSeries> {
    check_geometry(p, r, rho, metric)?;
    if times.iter().any(|&t| !(t > 0.0) || t > r * r * (1.0 + 1e-12)) {
        return Err(Error::Geometry("need 0 < t <= r^2".into()));
    }
    let mut gaps = vec![f64::NAN; times.len()];
    let mut min_difference = 0.0f64;
    paired_run(metric, p, r, rho, plan, times, |t, u, v, _, active| {
        let mut sup = f64::NEG_INFINITY;
        for i in 0..u.len() {
            if active[i] {
                let d = u[i] - v[i];
                sup = sup.max(d);
                min_difference = min_difference.min(d);
            }
        }
        for (k, &tk) in times.iter().enumerate() {
            if (t - tk).abs() <= 1e-13 * tk {
                gaps[k] = sup;
            }
        }
    })?;
    let (slope, intercept, r2) = if times.len() >= 2 && gaps.iter().all(|g| *g > 0.0) {
        let xs: Vec<f64> = times.iter().map(|t| r * r / t).collect();
        let ys: Vec<f64> = gaps.iter().map(|g| g.ln()).collect();
        linear_fit(&xs, &ys)
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };
    Ok(GapSeries {
        r,
        rho,
        times: times.to_vec(),
        gaps,
        min_difference,
        slope,
        intercept,
        r2,
    })
}

/// sup over x ∈ B_r(p) of ∫_{B_ρ(p)} (H − H_{B_r(p)})(t, x, y) dV(y).
pub fn solve_heat_dirichlet_gap(metric: &MetricField, p: &[f64], r: f64, rho: f64, plan: &SolvePlan, t: f64) -> Result<f64> {
    Ok(dirichlet_gap_series(metric, p, r, rho, plan, &[t])?.gaps[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_geometry() {
        let m = MetricField::euclidean(1);
        let plan = SolvePlan::default();
        assert!(matches!(
            solve_heat_dirichlet_gap(&m, &[0.0], 1.0, 1.5, &plan, 0.1),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn gap_nonnegative_and_small_at_short_times() {
        let m = MetricField::euclidean(1);
        let plan = SolvePlan {
            h: 1.0 / 512.0,
            tau: 1.0 / 512.0,
            theta: 0.5,
            padding: 4.0,
        };
        let s = dirichlet_gap_series(&m, &[0.0], 1.0, 0.5, &plan, &[0.002, 0.05, 0.2]).unwrap();
        assert!(s.min_difference > -1e-12);
        assert!(s.gaps[0] < 1e-6, "{:?}", s.gaps);
        assert!(s.gaps[0] < s.gaps[1] && s.gaps[1] < s.gaps[2]);
    }
}
