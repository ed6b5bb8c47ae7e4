use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{build_grid, check_ellipticity, evolve, plan_times, Discretization, Domain, HeatGrid, SolvePlan};
use crate::error::{invalid, Error, Result};
use crate::geometry::MetricField;
use crate::quad::linear_fit;

/// Two routes to x ↦ H(t,x,y) − H_y(t,x,y) on a common grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DuhamelResult {
    pub t: f64,
    pub grid: HeatGrid,
    /// Time convolution ∫ e^{(t−σ)Δ_g} F(σ) dσ.
    pub duhamel: Vec<f64>,
    /// Numeric H minus closed-form H_y.
    pub direct: Vec<f64>,
    pub l1_duhamel: f64,
    pub l1_direct: f64,
    /// ‖duhamel − direct‖_{L¹} / ‖direct‖_{L¹} (0 when both vanish).
    pub relative_gap: f64,
    /// Start of the convolution window; (0, sigma_min) is dropped.
    pub sigma_min: f64,
}

/// Least-squares fit of log ‖H − H_y‖_{L¹} against log t.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SqrtSlopeFit {
    pub times: Vec<f64>,
    pub l1: Vec<f64>,
    pub slope: f64,
    pub r2: f64,
}

/// Frozen Gaussian H_y and its first and second x-derivatives.
struct FrozenGaussian {
    g: DMatrix<f64>,
    ginv: DMatrix<f64>,
    y: Vec<f64>,
    n: usize,
}

impl FrozenGaussian {
    fn new(metric: &MetricField, y: &[f64]) -> Self {
        let g = metric.eval_matrix(y);
        let ginv = g.clone().try_inverse().expect("spd");
        Self {
            n: y.len(),
            g,
            ginv,
            y: y.to_vec(),
        }
    }

    /// (H, ∇H, D²H) at (t, x).
    fn derivatives(&self, t: f64, x: &[f64]) -> (f64, Vec<f64>, DMatrix<f64>) {
        let n = self.n;
        let d: Vec<f64> = x.iter().zip(&self.y).map(|(a, b)| a - b).collect();
        let gd: Vec<f64> = (0..n).map(|i| (0..n).map(|j| self.g[(i, j)] * d[j]).sum()).collect();
        let q: f64 = d.iter().zip(&gd).map(|(a, b)| a * b).sum();
        let h = (4.0 * std::f64::consts::PI * t).powf(-(n as f64) / 2.0) * (-q / (4.0 * t)).exp();
        let grad: Vec<f64> = gd.iter().map(|v| -h * v / (2.0 * t)).collect();
        let hess = DMatrix::from_fn(n, n, |i, j| h * (gd[i] * gd[j] / (4.0 * t * t) - self.g[(i, j)] / (2.0 * t)));
        (h, grad, hess)
    }

    fn value(&self, t: f64, x: &[f64]) -> f64 {
        self.derivatives(t, x).0
    }

    /// One-dimensional forcing from g(x) and g'(x):
    /// Δ_g u = u''/g − g'u'/(2g²).
    fn forcing_1d(&self, t: f64, x: f64, g: f64, dg: f64) -> f64 {
        let d = x - self.y[0];
        let gy = self.g[(0, 0)];
        let e = gy * d * d / (4.0 * t);
        if e > 700.0 {
            return 0.0;
        }
        let h = (4.0 * std::f64::consts::PI * t).powf(-0.5) * (-e).exp();
        let u1 = -h * gy * d / (2.0 * t);
        let u2 = h * (gy * gy * d * d / (4.0 * t * t) - gy / (2.0 * t));
        (1.0 / g - 1.0 / gy) * u2 - 0.5 * dg / (g * g) * u1
    }

    /// (Δ_g − Δ_{g(y)}) H_y at (t, x).
    fn forcing(&self, metric: &MetricField, t: f64, x: &[f64]) -> f64 {
        let n = self.n;
        if n == 1 {
            return self.forcing_1d(t, x[0], metric.eval_matrix(x)[(0, 0)], metric.partial(x, 0)[(0, 0)]);
        }
        let (_, grad, hess) = self.derivatives(t, x);
        let g = metric.eval_matrix(x);
        let det = g.determinant();
        let sq = det.sqrt();
        let gi = g.clone().try_inverse().expect("spd");
        let a = &gi * sq;
        // div of the columns of a: Σ_i ∂_i a^{ij}
        let mut diva = vec![0.0; n];
        for i in 0..n {
            let dg = metric.partial(x, i);
            let gidg = &gi * &dg;
            let tr = gidg.trace();
            let da = (&gi * (0.5 * tr) - &gidg * &gi) * sq;
            for j in 0..n {
                diva[j] += da[(i, j)];
            }
        }
        let mut lap_g = 0.0;
        let mut lap_y = 0.0;
        for i in 0..n {
            lap_g += diva[i] * grad[i];
            for j in 0..n {
                lap_g += a[(i, j)] * hess[(i, j)];
                lap_y += self.ginv[(i, j)] * hess[(i, j)];
            }
        }
        lap_g / sq - lap_y
    }
}

fn validate(metric: &MetricField, y: &[f64], t: f64, plan: &SolvePlan) -> Result<()> {
    plan.validate()?;
    if !(t > 0.0) {
        return Err(invalid("t", "must be positive"));
    }
    if y.len() != metric.dim() {
        return Err(Error::Dimension {
            expected: metric.dim(),
            got: y.len(),
        });
    }
    Ok(())
}

/// Geometric levels σ_min·q^k up to t_end (steps capped at `cap`), with
/// `extra` times merged in.
fn convolution_levels(sigma_min: f64, t_end: f64, extra: &[f64], cap: f64) -> Vec<f64> {
    let q = 1.02;
    let mut out = vec![sigma_min];
    let mut s = sigma_min;
    while s + (s * (q - 1.0)).min(cap) < t_end {
        s += (s * (q - 1.0)).min(cap);
        out.push(s);
    }
    out.push(t_end);
    out.extend(extra.iter().copied().filter(|v| *v > sigma_min && *v < t_end));
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs());
    out
}

/// Runs the Duhamel convolution, calling `observe(σ, w)` at every level.
fn run_duhamel(
    metric: &MetricField,
    frozen: &FrozenGaussian,
    disc: &mut Discretization,
    levels: &[f64],
    theta: f64,
    mut observe: impl FnMut(f64, &[f64]),
) -> Result<()> {
    let coords: Vec<Vec<f64>> = (0..disc.grid.len()).map(|i| disc.grid.coords(i)).collect();
    let active = disc.active.clone();
    let scalar: Vec<(f64, f64)> = if frozen.n == 1 {
        coords
            .iter()
            .map(|x| (metric.eval_matrix(x)[(0, 0)], metric.partial(x, 0)[(0, 0)]))
            .collect()
    } else {
        Vec::new()
    };
    let forcing_at = |s: f64| -> Vec<f64> {
        (0..coords.len())
            .map(|i| {
                if !active[i] {
                    0.0
                } else if frozen.n == 1 {
                    frozen.forcing_1d(s, coords[i][0], scalar[i].0, scalar[i].1)
                } else {
                    frozen.forcing(metric, s, &coords[i])
                }
            })
            .collect()
    };
    let mut w = vec![0.0; coords.len()];
    let mut f_prev = forcing_at(levels[0]);
    for (k, win) in levels.windows(2).enumerate() {
        let th = if k < 4 { 1.0 } else { theta };
        let f_next = forcing_at(win[1]);
        let f: Vec<f64> = f_prev
            .iter()
            .zip(&f_next)
            .map(|(a, b)| (1.0 - th) * a + th * b)
            .collect();
        disc.step(&mut w, win[1] - win[0], th, Some(&f))?;
        f_prev = f_next;
        observe(win[1], &w);
    }
    Ok(())
}

/// H(t,·,y) − H_y(t,·,y) by the Duhamel convolution, cross-checked against
/// the direct difference of a numeric solve and the closed form.
pub fn duhamel_difference(metric: &MetricField, y: &[f64], plan: &SolvePlan, t: f64) -> Result<DuhamelResult> {
    validate(metric, y, t, plan)?;
    let (grid, mask, _) = build_grid(&Domain::WholeSpace, &[y], plan, t)?;
    check_ellipticity(metric, &grid)?;
    let frozen = FrozenGaussian::new(metric, y);
    let hn = plan.h.powi(y.len() as i32);
    let sigma_min = 1e-5 * t;

    let mut disc = Discretization::new(metric, grid.clone(), mask)?;
    let mut duh = vec![0.0; grid.len()];
    if !metric.is_constant() {
        let levels = convolution_levels(sigma_min, t, &[], f64::INFINITY);
        run_duhamel(metric, &frozen, &mut disc, &levels, plan.theta, |s, w| {
            if s == t {
                duh.copy_from_slice(w);
            }
        })?;
    }

    let mut u = disc.point_source(y)?;
    evolve(&mut disc, &mut u, &plan_times(plan, t), plan.theta, |_, _| {})?;
    let direct: Vec<f64> = (0..grid.len())
        .map(|i| {
            if disc.active[i] {
                u[i] - frozen.value(t, &grid.coords(i))
            } else {
                0.0
            }
        })
        .collect();
    let l1_direct = direct.iter().map(|v| v.abs()).sum::<f64>() * hn;
    let l1_duhamel = duh.iter().map(|v| v.abs()).sum::<f64>() * hn;
    let diff = duh.iter().zip(&direct).map(|(a, b)| (a - b).abs()).sum::<f64>() * hn;
    let relative_gap = if l1_direct > 0.0 { diff / l1_direct } else { diff };
    Ok(DuhamelResult {
        t,
        grid,
        duhamel: duh,
        direct,
        l1_duhamel,
        l1_direct,
        relative_gap,
        sigma_min,
    })
}

/// Fits the small-time growth ‖H(t) − H_y(t)‖_{L¹} ∝ t^{slope} from one
/// Duhamel run sampled at `times`.
pub fn duhamel_sqrt_slope(metric: &MetricField, y: &[f64], plan: &SolvePlan, times: &[f64]) -> Result<SqrtSlopeFit> {
    if times.len() < 2 {
        return Err(Error::InsufficientSamples("need at least two times".into()));
    }
    let t_max = times.iter().cloned().fold(0.0, f64::max);
    let t_min = times.iter().cloned().fold(f64::INFINITY, f64::min);
    validate(metric, y, t_min, plan)?;
    if metric.is_constant() {
        return Err(invalid("metric", "difference vanishes identically for constant metrics"));
    }
    let (grid, mask, _) = build_grid(&Domain::WholeSpace, &[y], plan, t_max)?;
    check_ellipticity(metric, &grid)?;
    let frozen = FrozenGaussian::new(metric, y);
    let hn = plan.h.powi(y.len() as i32);
    let mut disc = Discretization::new(metric, grid, mask)?;
    let levels = convolution_levels(1e-4 * t_min, t_max, times, f64::INFINITY);
    let mut l1 = vec![f64::NAN; times.len()];
    run_duhamel(metric, &frozen, &mut disc, &levels, plan.theta, |s, w| {
        for (k, &tk) in times.iter().enumerate() {
            if (s - tk).abs() <= 1e-14 * tk {
                l1[k] = w.iter().map(|v| v.abs()).sum::<f64>() * hn;
            }
        }
    })?;
    let xs: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = l1.iter().map(|v| v.ln()).collect();
    let (slope, _, r2) = linear_fit(&xs, &ys);
    Ok(SqrtSlopeFit {
        times: times.to_vec(),
        l1,
        slope,
        r2,
    })
}

/// Duhamel run in a whole-space box padded for `t_end`, starting at
/// `sigma_min`, observing w = H − H_y at every level (requested `extra`
/// times are hit exactly). Returns the grid.
pub(crate) fn duhamel_levels(
    metric: &MetricField,
    y: &[f64],
    plan: &SolvePlan,
    sigma_min: f64,
    t_end: f64,
    extra: &[f64],
    mut observe: impl FnMut(f64, &[f64], &HeatGrid),
) -> Result<HeatGrid> {
    validate(metric, y, t_end, plan)?;
    let (grid, mask, _) = build_grid(&Domain::WholeSpace, &[y], plan, t_end)?;
    check_ellipticity(metric, &grid)?;
    if metric.is_constant() {
        return Ok(grid);
    }
    let frozen = FrozenGaussian::new(metric, y);
    let mut disc = Discretization::new(metric, grid.clone(), mask)?;
    let levels = convolution_levels(sigma_min, t_end, extra, plan.tau);
    run_duhamel(metric, &frozen, &mut disc, &levels, plan.theta, |s, w| observe(s, w, &grid))?;
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SpdMatrix;

    #[test]
    fn forcing_vanishes_for_constant_metric() {
        let m = MetricField::constant(SpdMatrix::from_rows(&[vec![1.2, 0.1], vec![0.1, 0.9]]).unwrap());
        let f = FrozenGaussian::new(&m, &[0.0, 0.0]);
        for x in [[0.1, 0.2], [0.5, -0.3]] {
            assert!(f.forcing(&m, 0.05, &x).abs() < 1e-10);
        }
    }

    #[test]
    fn forcing_matches_finite_difference_laplacian_1d() {
        let m = MetricField::sinusoidal_1d(0.3, 1.0, 0.2);
        let f = FrozenGaussian::new(&m, &[0.1]);
        let t = 0.05;
        let x = 0.23;
        let h = 1e-4;
        let u = |x: f64| f.value(t, &[x]);
        let a = |x: f64| 1.0 / m.eval_matrix(&[x])[(0, 0)].sqrt();
        let flux = |x: f64| a(x) * (u(x + h / 2.0) - u(x - h / 2.0)) / h;
        let lap_g = (flux(x + h / 2.0) - flux(x - h / 2.0)) / h / m.eval_matrix(&[x])[(0, 0)].sqrt();
        let gy = m.eval_matrix(&[0.1])[(0, 0)];
        let lap_y = (u(x + h) - 2.0 * u(x) + u(x - h)) / (h * h) / gy;
        let expect = lap_g - lap_y;
        let got = f.forcing(&m, t, &[x]);
        assert!((got - expect).abs() < 1e-4 * expect.abs().max(1.0), "{got} {expect}");
    }
}
