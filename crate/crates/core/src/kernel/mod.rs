//! The fractional kernel K(x,y) = ∫ t^{-1-s/2} H(t,x,y) dt: closed forms for
//! constant metrics, a numeric subordination of the heat solver, and the
//! kernel estimates (freezing, measure difference, Dirichlet gap).

mod estimates;
mod numeric;

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub use estimates::{
    dirichlet_kernel_gap, duhamel_constant, kernel_l1_difference, measure_difference_integral, r_sweep, DirichletKernelGap,
    EstimateKind, L1Difference, MeasureDifference, SweepReport, SweepRow,
};
pub use numeric::{kernel_numeric, ErrorBudget, KernelNumericResult, NumericKernel, TimeBlock};

use crate::error::{invalid, Error, Result};
use crate::geometry::{check_s, SpdMatrix};
use crate::quad::{adaptive, gl};
use crate::special::{cns, sphere_area};

/// C_{n,s} = 2^s π^{-n/2} Γ((n+s)/2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cns {
    pub n: usize,
    pub s: f64,
    pub value: f64,
}

impl Cns {
    pub fn new(n: usize, s: f64) -> Result<Self> {
        check_s(s)?;
        if n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        Ok(Self { n, s, value: cns(n, s) })
    }
}

/// Constants of the certified budgets: a Gaussian envelope
/// H ≤ ratio·(4πt)^{-n/2} exp(−c|x−y|²/t) and the Duhamel constant in
/// ‖H(t,·,y) − H_y(t,·,y)‖_{L¹} ≤ min(2, duhamel·‖Dg‖·√t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BudgetConstants {
    pub gauss_ratio: f64,
    pub gauss_c: f64,
    pub duhamel: f64,
}

impl Default for BudgetConstants {
    fn default() -> Self {
        Self {
            gauss_ratio: 2.0,
            gauss_c: 0.125,
            duhamel: 1.0,
        }
    }
}

/// How K is evaluated.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum KernelModel {
    ConstantMetric { g: SpdMatrix, s: f64 },
    Numeric(NumericKernel),
}

impl KernelModel {
    pub fn euclidean(n: usize, s: f64) -> Result<Self> {
        check_s(s)?;
        Ok(Self::ConstantMetric {
            g: SpdMatrix::identity(n),
            s,
        })
    }

    pub fn constant(g: SpdMatrix, s: f64) -> Result<Self> {
        check_s(s)?;
        Ok(Self::ConstantMetric { g, s })
    }

    pub fn s(&self) -> f64 {
        match self {
            Self::ConstantMetric { s, .. } => *s,
            Self::Numeric(k) => k.s,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::ConstantMetric { g, .. } => g.dim(),
            Self::Numeric(k) => k.metric.dim(),
        }
    }
}

fn check_pair(n: usize, x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != n || y.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: if x.len() != n { x.len() } else { y.len() },
        });
    }
    if x == y {
        return Err(Error::Singular);
    }
    Ok(())
}

/// K_g(x,y) = C_{n,s}|x−y|_g^{-(n+s)}.
pub fn kernel_constant(g: &SpdMatrix, x: &[f64], y: &[f64], s: f64) -> Result<f64> {
    check_s(s)?;
    let n = g.dim();
    check_pair(n, x, y)?;
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let r = g.norm(&d);
    Ok(cns(n, s) * r.powf(-(n as f64 + s)))
}

/// ∫_0^∞ t^{-1-s/2} H_g(t,x,y) dt by adaptive quadrature in log t.
pub fn kernel_time_quadrature(g: &SpdMatrix, x: &[f64], y: &[f64], s: f64) -> Result<f64> {
    check_s(s)?;
    let n = g.dim();
    check_pair(n, x, y)?;
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let q = g.quad_form(&d);
    let nf = n as f64;
    // t^{-s/2} H(t) dt/t with t = e^u; the peak sits near t ~ q/(2(n+s)).
    let f = |u: f64| {
        let t = u.exp();
        t.powf(-s / 2.0) * (4.0 * PI * t).powf(-nf / 2.0) * (-q / (4.0 * t)).exp()
    };
    let c = (q / 4.0).ln();
    let pts: Vec<f64> = (-4..=30).map(|k| c + 2.0 * k as f64).collect();
    let r = adaptive(f, &pts, 0.0, 1e-13, 4000);
    Ok(r.value)
}

/// ∫_{S^{n-1}} |θ|_g^{-(n+s)} dθ, the angular factor of the constant-metric
/// tail (n ≤ 3 numerically; ω_{n−1}·det(g)^{-1/2} in closed form for any n).
pub fn angular_factor(g: &SpdMatrix, s: f64) -> Result<f64> {
    let n = g.dim();
    let p = -(n as f64 + s);
    match n {
        1 => Ok(2.0 * g.get(0, 0).powf(p / 2.0)),
        2 => {
            let rule = gl(48);
            let mut acc = 0.0;
            for k in 0..16 {
                let a = 2.0 * PI * k as f64 / 16.0;
                acc += rule.integrate(a, a + PI / 8.0, |th| g.norm(&[th.cos(), th.sin()]).powf(p));
            }
            Ok(acc)
        }
        3 => {
            let rule = gl(32);
            let mut acc = 0.0;
            for k in 0..8 {
                let a = PI * k as f64 / 8.0;
                acc += rule.integrate(a, a + PI / 8.0, |th| {
                    let mut inner = 0.0;
                    for m in 0..16 {
                        let b = 2.0 * PI * m as f64 / 16.0;
                        inner += rule.integrate(b, b + PI / 8.0, |ph| {
                            let w = [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()];
                            g.norm(&w).powf(p)
                        });
                    }
                    inner * th.sin()
                });
            }
            Ok(acc)
        }
        _ => Ok(sphere_area(n) / g.sqrt_det()),
    }
}

/// ∫_{|x−y|_g > r} K_g(x,y) dV_g(x) = ω_{n−1} C_{n,s} r^{-s}/s, for every
/// constant g (the substitution z = g^{1/2}(x−y) maps it to the Euclidean
/// case); `y` only fixes the dimension.
pub fn tail_integral_constant(y: &[f64], r: f64, s: f64, g: &SpdMatrix) -> Result<f64> {
    check_s(s)?;
    if !(r > 0.0) {
        return Err(invalid("r", "must be positive"));
    }
    let n = g.dim();
    if y.len() != n {
        return Err(Error::Dimension { expected: n, got: y.len() });
    }
    Ok(sphere_area(n) * cns(n, s) * r.powf(-s) / s)
}

/// Numeric counterpart of [`tail_integral_constant`]: polar quadrature over
/// the shell r < |x−y|_g < outer·r plus the closed-form remainder beyond.
/// Returns (shell, remainder).
pub fn tail_integral_numeric(y: &[f64], r: f64, s: f64, g: &SpdMatrix, outer: f64) -> Result<(f64, f64)> {
    check_s(s)?;
    if !(r > 0.0) || !(outer > 1.0) {
        return Err(invalid("r", "need r > 0 and outer > 1"));
    }
    let n = g.dim();
    if y.len() != n {
        return Err(Error::Dimension { expected: n, got: y.len() });
    }
    if n > 3 {
        return Err(Error::UnsupportedDimension(n));
    }
    let c = cns(n, s);
    let nf = n as f64;
    // Along a Euclidean direction θ the shell is r/|θ|_g < ρ < outer·r/|θ|_g.
    let radial = |th: &[f64]| {
        let a = g.norm(th);
        let f = |u: f64| {
            let rho = u.exp();
            c * (rho * a).powf(-(nf + s)) * rho.powi(n as i32)
        };
        let lo = (r / a).ln();
        let hi = (outer * r / a).ln();
        let pts: Vec<f64> = (0..=8).map(|k| lo + (hi - lo) * k as f64 / 8.0).collect();
        adaptive(f, &pts, 0.0, 1e-12, 400).value
    };
    let shell = match n {
        1 => radial(&[1.0]) + radial(&[-1.0]),
        2 => {
            let rule = gl(32);
            (0..16)
                .map(|k| {
                    let a = 2.0 * PI * k as f64 / 16.0;
                    rule.integrate(a, a + PI / 8.0, |th| radial(&[th.cos(), th.sin()]))
                })
                .sum()
        }
        _ => {
            let rule = gl(16);
            let mut acc = 0.0;
            for k in 0..8 {
                let a = PI * k as f64 / 8.0;
                acc += rule.integrate(a, a + PI / 8.0, |th| {
                    let mut inner = 0.0;
                    for m in 0..16 {
                        let b = 2.0 * PI * m as f64 / 16.0;
                        inner += rule.integrate(b, b + PI / 8.0, |ph| {
                            radial(&[th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()])
                        });
                    }
                    inner * th.sin()
                });
            }
            acc
        }
    } * g.sqrt_det();
    let remainder = sphere_area(n) * c * (outer * r).powf(-s) / s;
    Ok((shell, remainder))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_examples() {
        let id = SpdMatrix::identity(1);
        let v = kernel_constant(&id, &[1.0], &[0.0], 0.5).unwrap();
        assert!((v - 0.977_741_067_446_923_9).abs() < 1e-14);
        let g4 = SpdMatrix::scaled_identity(1, 4.0).unwrap();
        let w = kernel_constant(&g4, &[1.0], &[0.0], 0.5).unwrap();
        assert!((w - 2f64.powf(-1.5) * v).abs() < 1e-14);
        assert!(matches!(kernel_constant(&id, &[0.0], &[0.0], 0.5), Err(Error::Singular)));
    }

    #[test]
    fn angular_factor_closed_form_for_scalar_metrics() {
        for n in 1..=3 {
            let g = SpdMatrix::scaled_identity(n, 1.7).unwrap();
            let s = 0.4;
            let expect = sphere_area(n) * 1.7f64.powf(-(n as f64 + s) / 2.0);
            assert!((angular_factor(&g, s).unwrap() - expect).abs() < 1e-10 * expect);
        }
    }

    #[test]
    fn tail_numeric_is_independent_of_metric() {
        let g = SpdMatrix::from_rows(&[vec![1.3, 0.2], vec![0.2, 0.8]]).unwrap();
        let (shell, rem) = tail_integral_numeric(&[0.0, 0.0], 0.5, 0.3, &g, 100.0).unwrap();
        let exact = tail_integral_constant(&[0.0, 0.0], 0.5, 0.3, &g).unwrap();
        assert!(((shell + rem) - exact).abs() < 1e-8 * exact);
    }
}
