use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{check_pair, BudgetConstants, KernelModel};
use crate::error::{invalid, Error, Result};
use crate::geometry::{check_s, default_grid_for, check_admissible, MetricField, SpdMatrix};
use crate::heat::{build_grid, check_ellipticity, evolve, plan_times_with, Discretization, Domain, SolvePlan};
use crate::special::{lower_gamma, upper_gamma};

/// Heat-kernel subordination on the numeric solver: frozen closed form on
/// (0, t₀), numeric H on (t₀, t_max), frozen closed form beyond t_max.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NumericKernel {
    pub metric: MetricField,
    pub plan: SolvePlan,
    pub s: f64,
    /// Local admissibility radius; t₀ = (radius/4)².
    pub radius: f64,
    pub t_max: f64,
    #[serde(default)]
    pub constants: BudgetConstants,
    /// Fixed solver box; None pads a box around each evaluation pair.
    #[serde(default)]
    pub bounds: Option<(Vec<f64>, Vec<f64>)>,
}

impl NumericKernel {
    /// Defaults to t_max = 16·radius².
    pub fn new(metric: MetricField, plan: SolvePlan, s: f64, radius: f64) -> Result<Self> {
        let k = Self {
            metric,
            plan,
            s,
            radius,
            t_max: 16.0 * radius * radius,
            constants: BudgetConstants::default(),
            bounds: None,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        check_s(self.s)?;
        self.plan.validate()?;
        self.metric.validate()?;
        if !(self.radius > 0.0) {
            return Err(invalid("radius", "must be positive"));
        }
        if !(self.t_max > self.t0()) {
            return Err(invalid("t_max", "must exceed t0 = (radius/4)^2"));
        }
        Ok(())
    }

    pub fn t0(&self) -> f64 {
        (self.radius / 4.0).powi(2)
    }

    /// Dyadic time marks t₀·2^j, closed by t_max.
    pub fn time_grid(&self) -> Vec<f64> {
        let mut out = vec![self.t0()];
        while out[out.len() - 1] * 2.0 < self.t_max {
            out.push(out[out.len() - 1] * 2.0);
        }
        out.push(self.t_max);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    /// Bound on ∫_0^{t₀} t^{-1-s/2}|H − H_y| dt.
    pub small_t_correction: f64,
    /// Bound on ∫_{t_max}^∞ t^{-1-s/2}|H − H_y| dt.
    pub large_time_tail: f64,
    /// |I_h − I_{2h}| for the numeric window.
    pub discretization: f64,
}

impl ErrorBudget {
    pub fn total(&self) -> f64 {
        self.small_t_correction + self.large_time_tail + self.discretization
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeBlock {
    pub t_start: f64,
    pub t_end: f64,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelNumericResult {
    pub value: f64,
    pub small_t_part: f64,
    pub numeric_part: f64,
    pub large_t_part: f64,
    pub t0: f64,
    pub t_max: f64,
    pub blocks: Vec<TimeBlock>,
    pub error_budget: ErrorBudget,
}

/// sup ‖Dg‖, closed form when the family has one, sampled otherwise.
pub(crate) fn lipschitz(metric: &MetricField) -> Result<f64> {
    if let Some(b) = metric.grad_bound() {
        return Ok(b);
    }
    Ok(check_admissible(metric, 1.0, &default_grid_for(metric))?.worst_lipschitz)
}

/// (∫_0^{t₀}, ∫_{t_max}^∞) of t^{-1-s/2}(4πt)^{-n/2}e^{-q/4t} dt.
pub(crate) fn frozen_parts(n: usize, s: f64, q: f64, t0: f64, t_max: f64) -> (f64, f64) {
    let a = (n as f64 + s) / 2.0;
    let pref = (4.0 * PI).powf(-(n as f64) / 2.0) * (4.0 / q).powf(a);
    (pref * upper_gamma(a, q / (4.0 * t0)), pref * lower_gamma(a, q / (4.0 * t_max)))
}

fn numeric_window(k: &NumericKernel, plan: &SolvePlan, x: &[f64], y: &[f64]) -> Result<(f64, Vec<TimeBlock>)> {
    let marks = k.time_grid();
    let domain = match &k.bounds {
        Some((lo, hi)) => Domain::Box {
            lower: lo.clone(),
            upper: hi.clone(),
        },
        None => Domain::WholeSpace,
    };
    let (grid, mask, _) = build_grid(&domain, &[y, x], plan, k.t_max)?;
    check_ellipticity(&k.metric, &grid)?;
    let lattice = grid.clone();
    let mut disc = Discretization::new(&k.metric, grid, mask)?;
    let mut u = disc.point_source(y)?;
    let times = plan_times_with(plan, k.t_max, &marks);
    let s = k.s;
    let t0 = k.t0();
    let weight = |t: f64| t.powf(-1.0 - s / 2.0);
    let mut blocks: Vec<TimeBlock> = marks
        .windows(2)
        .map(|w| TimeBlock {
            t_start: w[0],
            t_end: w[1],
            contribution: 0.0,
        })
        .collect();
    let mut prev: Option<(f64, f64)> = None;
    let mut err = None;
    evolve(&mut disc, &mut u, &times, plan.theta, |t, u| {
        if t < t0 * (1.0 - 1e-12) {
            return;
        }
        let Some(h) = lattice.interpolate(u, x) else {
            err = Some(invalid("x", "outside the solver box"));
            return;
        };
        let f = weight(t) * h;
        if let Some((tp, fp)) = prev {
            let c = 0.5 * (t - tp) * (f + fp);
            let mid = 0.5 * (t + tp);
            if let Some(b) = blocks.iter_mut().find(|b| mid >= b.t_start && mid <= b.t_end) {
                b.contribution += c;
            }
        }
        prev = Some((t, f));
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    let total = blocks.iter().map(|b| b.contribution).sum();
    Ok((total, blocks))
}

fn check_padding(k: &NumericKernel, pts: &[&[f64]]) -> Result<()> {
    let Some((lo, hi)) = &k.bounds else {
        return Ok(());
    };
    let pad = k.plan.padding * SolvePlan::diffusion_length(k.t_max);
    for p in pts {
        let margin = p
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(v, (a, b))| (v - a).min(b - v))
            .fold(f64::INFINITY, f64::min);
        if margin < pad {
            return Err(Error::PaddingViolated {
                point: p.to_vec(),
                padding: pad,
            });
        }
    }
    Ok(())
}

/// K(x,y) for a numeric model, with an itemized error budget.
pub fn kernel_numeric(model: &KernelModel, x: &[f64], y: &[f64]) -> Result<KernelNumericResult> {
    let KernelModel::Numeric(k) = model else {
        return Err(invalid("model", "constant-metric models are evaluated by kernel_constant"));
    };
    k.validate()?;
    let n = k.metric.dim();
    check_pair(n, x, y)?;
    check_padding(k, &[x, y])?;
    let s = k.s;
    let t0 = k.t0();
    let gy: SpdMatrix = k.metric.eval(y);
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let (small_t_part, large_t_part) = frozen_parts(n, s, gy.quad_form(&d), t0, k.t_max);

    let (numeric_part, blocks) = numeric_window(k, &k.plan, x, y)?;
    let coarse = SolvePlan {
        h: 2.0 * k.plan.h,
        tau: 2.0 * k.plan.tau,
        ..k.plan
    };
    let (coarse_part, _) = numeric_window(k, &coarse, x, y)?;

    let lip = lipschitz(&k.metric)?;
    let c = &k.constants;
    let env = c.gauss_ratio * (4.0 * PI).powf(-(n as f64) / 2.0);
    let (small, large) = if lip > 0.0 {
        let b = c.gauss_c * d.iter().map(|v| v * v).sum::<f64>();
        let a = (n as f64 + s - 1.0) / 2.0;
        let small = env * c.duhamel * lip * b.powf(-a) * upper_gamma(a, b / t0);
        let large = 2.0 * env * 2.0 / (n as f64 + s) * k.t_max.powf(-(n as f64 + s) / 2.0);
        (small, large)
    } else {
        (0.0, 0.0)
    };
    Ok(KernelNumericResult {
        value: small_t_part + numeric_part + large_t_part,
        small_t_part,
        numeric_part,
        large_t_part,
        t0,
        t_max: k.t_max,
        blocks,
        error_budget: ErrorBudget {
            small_t_correction: small,
            large_time_tail: large,
            discretization: (numeric_part - coarse_part).abs(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::kernel_constant;

    #[test]
    fn frozen_parts_sum_to_closed_form() {
        let g = SpdMatrix::identity(1);
        let (a, b) = frozen_parts(1, 0.5, 0.49, 0.03, 0.03);
        let k = kernel_constant(&g, &[0.7], &[0.0], 0.5).unwrap();
        assert!((a + b - k).abs() < 1e-12 * k);
    }

    #[test]
    fn constant_metric_matches_closed_form() {
        let g = SpdMatrix::scaled_identity(1, 1.5).unwrap();
        let plan = SolvePlan {
            h: 1.0 / 64.0,
            tau: 1.0 / 128.0,
            theta: 0.5,
            padding: 4.0,
        };
        let k = NumericKernel::new(MetricField::constant(g.clone()), plan, 0.5, 1.0).unwrap();
        let m = KernelModel::Numeric(k);
        let r = kernel_numeric(&m, &[0.4], &[-0.1]).unwrap();
        let exact = kernel_constant(&g, &[0.4], &[-0.1], 0.5).unwrap();
        assert!((r.value - exact).abs() <= r.error_budget.total(), "{} {} {:?}", r.value, exact, r.error_budget);
        assert!(r.large_t_part <= 2.0 / 0.5 * r.t_max.powf(-0.25));
    }
}
