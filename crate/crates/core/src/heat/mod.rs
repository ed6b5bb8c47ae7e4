//! Heat kernels: closed forms for constant metrics and a finite-element
//! solver for variable metrics in one and two dimensions.

mod banded;
mod duhamel;
mod fem;
mod gap;
mod gauss;

use serde::{Deserialize, Serialize};

pub use duhamel::{duhamel_difference, duhamel_sqrt_slope, DuhamelResult, SqrtSlopeFit};
pub use fem::HeatGrid;
pub use gap::{dirichlet_gap_series, solve_heat_dirichlet_gap, GapSeries};
pub use gauss::{envelope_ratio, gaussian_bound_fit, GaussianFit, GaussianSample};

pub(crate) use duhamel::duhamel_levels;
pub(crate) use fem::Discretization;
pub(crate) use gap::paired_run;

use crate::error::{invalid, Error, Result};
use crate::geometry::{dist, MetricField, SpdMatrix};

/// H_g(t,x,y) = (4πt)^{-n/2} exp(−|x−y|²_g / 4t) against dV_g.
pub fn heat_constant(g: &SpdMatrix, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid("t", "must be positive"));
    }
    let n = g.dim();
    if x.len() != n || y.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: x.len().min(y.len()),
        });
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let q = g.quad_form(&d);
    Ok((4.0 * std::f64::consts::PI * t).powf(-(n as f64) / 2.0) * (-q / (4.0 * t)).exp())
}

/// Discretization parameters for the numeric heat solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolvePlan {
    /// Spatial step.
    pub h: f64,
    /// Largest time step; early steps are graded down from min(τ, h²).
    pub tau: f64,
    /// 0.5 = trapezoidal, 1 = implicit Euler.
    pub theta: f64,
    /// Whole-space boxes extend `padding` diffusion lengths around the source.
    pub padding: f64,
}

impl Default for SolvePlan {
    fn default() -> Self {
        Self {
            h: 1.0 / 64.0,
            tau: 1.0 / 64.0,
            theta: 0.5,
            padding: 4.0,
        }
    }
}

/// Number of implicit-Euler start-up steps before switching to θ.
const RANNACHER_STEPS: usize = 4;

impl SolvePlan {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !(self.tau > 0.0) {
            return Err(invalid("plan", "h and tau must be positive"));
        }
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(invalid("theta", "must lie in [0.5, 1]"));
        }
        if !(self.padding >= 1.0) {
            return Err(invalid("padding", "must be at least 1"));
        }
        if self.theta < 1.0 && self.tau > 2.0 * self.h {
            return Err(Error::Resolution {
                theta: self.theta,
                suggested: 2.0 * self.h,
            });
        }
        Ok(())
    }

    /// Diffusion length sqrt(4 t λ_max(g⁻¹)) with λ_max(g⁻¹) ≤ 2 on admissible metrics.
    pub fn diffusion_length(t: f64) -> f64 {
        (8.0 * t).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryTag {
    WholeSpaceTruncated,
    Dirichlet,
}

/// Where the heat equation is posed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    /// ℝⁿ, approximated by a padded box around the relevant points.
    WholeSpace,
    /// Dirichlet on the walls of [lower, upper].
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Dirichlet on ∂B_radius(center).
    Ball { center: Vec<f64>, radius: f64 },
}

/// A grid function y ↦ H(t, x₀, y).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeatField {
    pub t: f64,
    pub source: Vec<f64>,
    pub grid: HeatGrid,
    pub values: Vec<f64>,
    pub boundary: BoundaryTag,
    pub plan: SolvePlan,
    /// Σ mᵢ uᵢ at the final time.
    pub mass: f64,
    /// Largest discrete mass over all time steps.
    pub max_mass: f64,
    /// Most negative nodal value encountered.
    pub min_value: f64,
}

impl HeatField {
    pub fn value_at(&self, y: &[f64]) -> Option<f64> {
        self.grid.interpolate(&self.values, y)
    }

    /// Rows (coordinates..., value) for CSV export.
    pub fn csv_rows(&self) -> Vec<Vec<f64>> {
        (0..self.grid.len())
            .map(|i| {
                let mut r = self.grid.coords(i);
                r.push(self.values[i]);
                r
            })
            .collect()
    }

    /// ∫ |u| dx by the nodal rule.
    pub fn l1_dx(&self) -> f64 {
        let hn = self.grid.h.powi(self.grid.dim() as i32);
        self.values.iter().map(|v| v.abs()).sum::<f64>() * hn
    }
}

/// Lattice and active-node mask for a domain, padded around `points` by the
/// diffusion length of time `t`.
pub(crate) fn build_grid(domain: &Domain, points: &[&[f64]], plan: &SolvePlan, t: f64) -> Result<(HeatGrid, Box<dyn Fn(&[f64]) -> bool + Send + Sync>, BoundaryTag)> {
    let n = points[0].len();
    match domain {
        Domain::WholeSpace => {
            let pad = plan.padding * SolvePlan::diffusion_length(t) + 2.0 * plan.h;
            let lower: Vec<f64> = (0..n)
                .map(|d| points.iter().map(|p| p[d]).fold(f64::INFINITY, f64::min) - pad)
                .collect();
            let upper: Vec<f64> = (0..n)
                .map(|d| points.iter().map(|p| p[d]).fold(f64::NEG_INFINITY, f64::max) + pad)
                .collect();
            Ok((HeatGrid::covering(&lower, &upper, plan.h), Box::new(|_| true), BoundaryTag::WholeSpaceTruncated))
        }
        Domain::Box { lower, upper } => {
            if lower.len() != n || upper.len() != n || lower.iter().zip(upper).any(|(a, b)| a >= b) {
                return Err(invalid("box", "need lower < upper in every coordinate"));
            }
            let (lo, hi) = (lower.clone(), upper.clone());
            let grid = HeatGrid::covering(&lo, &hi, plan.h);
            let mask = move |x: &[f64]| x.iter().zip(&lo).zip(&hi).all(|((v, a), b)| v > a && v < b);
            Ok((grid, Box::new(mask), BoundaryTag::Dirichlet))
        }
        Domain::Ball { center, radius } => {
            if center.len() != n || !(*radius > 0.0) {
                return Err(invalid("ball", "bad center or radius"));
            }
            let lower: Vec<f64> = center.iter().map(|c| c - radius - 2.0 * plan.h).collect();
            let upper: Vec<f64> = center.iter().map(|c| c + radius + 2.0 * plan.h).collect();
            let (c, r) = (center.clone(), *radius);
            let mask = move |x: &[f64]| dist(x, &c) < r * (1.0 - 1e-12);
            Ok((HeatGrid::covering(&lower, &upper, plan.h), Box::new(mask), BoundaryTag::Dirichlet))
        }
    }
}

pub(crate) fn check_ellipticity(metric: &MetricField, grid: &HeatGrid) -> Result<()> {
    metric.validate()?;
    if let Some((lo, hi)) = metric.ellipticity_bounds() {
        if lo >= 0.5 - 1e-12 && hi <= 2.0 + 1e-12 {
            return Ok(());
        }
    }
    let step = (grid.len() / 4096).max(1);
    for i in (0..grid.len()).step_by(step) {
        let (lo, hi) = metric.eval(&grid.coords(i)).eigen_bounds();
        if lo < 0.5 - 1e-12 || hi > 2.0 + 1e-12 {
            return Err(Error::Inadmissible(format!(
                "eigenvalues ({lo}, {hi}) at {:?} outside [1/2, 2]",
                grid.coords(i)
            )));
        }
    }
    Ok(())
}

/// Evolves `u` through the given time levels, calling `observe(t, u)` after
/// each step. Tracks the discrete mass and the most negative value.
pub(crate) fn evolve(
    disc: &mut Discretization,
    u: &mut [f64],
    times: &[f64],
    theta: f64,
    mut observe: impl FnMut(f64, &[f64]),
) -> Result<(f64, f64)> {
    let mut t = 0.0;
    let mut max_mass = disc.mass_of(u);
    let mut min_value = 0.0f64;
    for (k, &tn) in times.iter().enumerate() {
        let th = if k < RANNACHER_STEPS { 1.0 } else { theta };
        disc.step(u, tn - t, th, None)?;
        t = tn;
        max_mass = max_mass.max(disc.mass_of(u));
        min_value = min_value.min(u.iter().cloned().fold(0.0, f64::min));
        observe(t, u);
    }
    Ok((max_mass, min_value))
}

/// Time levels for a plan: four implicit-Euler half steps (Rannacher
/// start-up, damping the stiff modes of rough data), then uniform steps τ.
pub(crate) fn plan_times(plan: &SolvePlan, t: f64) -> Vec<f64> {
    let tau = plan.tau.min(t / 4.0);
    let mut out: Vec<f64> = (1..=RANNACHER_STEPS).map(|k| 0.5 * tau * k as f64).collect();
    let mut s = 0.5 * tau * RANNACHER_STEPS as f64;
    while s < t * (1.0 - 1e-12) {
        s = (s + tau).min(t);
        if t - s < 1e-9 * tau {
            s = t;
        }
        out.push(s);
    }
    out
}

/// `plan_times` with the extra levels `extra` merged in.
pub(crate) fn plan_times_with(plan: &SolvePlan, t: f64, extra: &[f64]) -> Vec<f64> {
    let mut out = plan_times(plan, t);
    out.extend(extra.iter().copied().filter(|v| *v > 0.0 && *v < t));
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * b.abs());
    out
}

/// Numeric H(t, x₀, ·) from a unit point mass at x₀.
pub fn solve_heat(metric: &MetricField, plan: &SolvePlan, t: f64, x0: &[f64], domain: &Domain) -> Result<HeatField> {
    plan.validate()?;
    if !(t > 0.0) {
        return Err(invalid("t", "must be positive"));
    }
    if x0.len() != metric.dim() {
        return Err(Error::Dimension {
            expected: metric.dim(),
            got: x0.len(),
        });
    }
    let (grid, mask, tag) = build_grid(domain, &[x0], plan, t)?;
    if !mask(x0) {
        return Err(invalid("x0", "source outside the domain"));
    }
    check_ellipticity(metric, &grid)?;
    let mut disc = Discretization::new(metric, grid, mask)?;
    let mut u = disc.point_source(x0)?;
    let times = plan_times(plan, t);
    let (max_mass, min_value) = evolve(&mut disc, &mut u, &times, plan.theta, |_, _| {})?;
    let mass = disc.mass_of(&u);
    Ok(HeatField {
        t,
        source: x0.to_vec(),
        grid: disc.grid.clone(),
        values: u,
        boundary: tag,
        plan: *plan,
        mass,
        max_mass,
        min_value,
    })
}

/// |H(t,x,y) − H(t,y,x)| / max(H) from two solves sharing one padded box.
pub fn symmetry_residual(metric: &MetricField, plan: &SolvePlan, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    let pad = plan.padding * SolvePlan::diffusion_length(t) + 2.0 * plan.h;
    let lower: Vec<f64> = x.iter().zip(y).map(|(a, b)| a.min(*b) - pad).collect();
    let upper: Vec<f64> = x.iter().zip(y).map(|(a, b)| a.max(*b) + pad).collect();
    let domain = Domain::Box { lower, upper };
    let a = solve_heat(metric, plan, t, x, &domain)?;
    let b = solve_heat(metric, plan, t, y, &domain)?;
    let hxy = a.value_at(y).ok_or_else(|| invalid("y", "outside box"))?;
    let hyx = b.value_at(x).ok_or_else(|| invalid("x", "outside box"))?;
    Ok((hxy - hyx).abs() / hxy.abs().max(hyx.abs()).max(1e-300))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_examples() {
        let id = SpdMatrix::identity(1);
        let t = 1.0 / (4.0 * std::f64::consts::PI);
        assert!((heat_constant(&id, t, &[0.3], &[0.3]).unwrap() - 1.0).abs() < 1e-15);
        let g4 = SpdMatrix::scaled_identity(1, 4.0).unwrap();
        let v = heat_constant(&g4, 1.0, &[0.0], &[1.0]).unwrap();
        let e = heat_constant(&id, 1.0, &[0.0], &[2.0]).unwrap();
        assert_eq!(v, e);
        assert!((v - (4.0 * std::f64::consts::PI).powf(-0.5) * (-1f64).exp()).abs() < 1e-15);
        assert!(heat_constant(&id, 0.0, &[0.0], &[0.0]).is_err());
    }

    #[test]
    fn numeric_euclidean_close_to_gaussian_1d() {
        let plan = SolvePlan {
            h: 0.01,
            tau: 0.0025,
            theta: 0.5,
            padding: 4.0,
        };
        let f = solve_heat(&MetricField::euclidean(1), &plan, 0.1, &[0.0], &Domain::WholeSpace).unwrap();
        let id = SpdMatrix::identity(1);
        for y in [0.0, 0.2, 0.5] {
            let e = heat_constant(&id, 0.1, &[0.0], &[y]).unwrap();
            assert!((f.value_at(&[y]).unwrap() - e).abs() < 2e-4, "{y}");
        }
        assert!(f.max_mass <= 1.0 + 1e-10);
    }

    #[test]
    fn resolution_check_suggests_step() {
        let plan = SolvePlan {
            h: 0.01,
            tau: 0.5,
            theta: 0.5,
            padding: 4.0,
        };
        assert!(matches!(plan.validate(), Err(Error::Resolution { .. })));
    }
}
