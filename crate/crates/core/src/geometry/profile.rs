use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Height functions f: ℝ^{n-1} → ℝ describing subgraphs {xⁿ < f(x')}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphProfile {
    Constant { value: f64 },
    /// f(x') = slope·x' + offset
    Linear { slope: Vec<f64>, offset: f64 },
    /// f(x') = a sin(k·x' + φ)
    Sine {
        amplitude: f64,
        wavevector: Vec<f64>,
        phase: f64,
    },
    /// f(x') = c |x'|^p
    Power { coefficient: f64, exponent: f64 },
    /// f(x') = a |x'|² / (1 + |x'|²)
    Rational { amplitude: f64 },
    Sum { terms: Vec<GraphProfile> },
    /// f(x') = λ base(x'/λ)
    Dilated { base: Box<GraphProfile>, factor: f64 },
    /// Clamped cubic spline on a uniform grid over [-1, 1], `exterior`
    /// outside. One horizontal dimension only.
    Gridded(GriddedProfile),
}

impl GraphProfile {
    pub fn zero() -> Self {
        Self::Constant { value: 0.0 }
    }

    pub fn sine_1d(amplitude: f64, frequency: f64, phase: f64) -> Self {
        Self::Sine {
            amplitude,
            wavevector: vec![frequency],
            phase,
        }
    }

    pub fn linear_1d(slope: f64, offset: f64) -> Self {
        Self::Linear {
            slope: vec![slope],
            offset,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Linear { slope, offset } => offset + dot(slope, x),
            Self::Sine {
                amplitude,
                wavevector,
                phase,
            } => amplitude * (dot(wavevector, x) + phase).sin(),
            Self::Power {
                coefficient,
                exponent,
            } => coefficient * norm(x).powf(*exponent),
            Self::Rational { amplitude } => {
                let r2 = x.iter().map(|v| v * v).sum::<f64>();
                amplitude * r2 / (1.0 + r2)
            }
            Self::Sum { terms } => terms.iter().map(|t| t.eval(x)).sum(),
            Self::Dilated { base, factor } => {
                let y: Vec<f64> = x.iter().map(|v| v / factor).collect();
                factor * base.eval(&y)
            }
            Self::Gridded(g) => g.eval(x[0]),
        }
    }

    pub fn eval1(&self, x: f64) -> f64 {
        self.eval(&[x])
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Self::Constant { .. } => vec![0.0; x.len()],
            Self::Linear { slope, .. } => slope.clone(),
            Self::Sine {
                amplitude,
                wavevector,
                phase,
            } => {
                let c = amplitude * (dot(wavevector, x) + phase).cos();
                wavevector.iter().map(|k| c * k).collect()
            }
            Self::Power {
                coefficient,
                exponent,
            } => {
                let r = norm(x);
                if r == 0.0 {
                    return vec![0.0; x.len()];
                }
                let d = coefficient * exponent * r.powf(exponent - 2.0);
                x.iter().map(|v| d * v).collect()
            }
            Self::Rational { amplitude } => {
                let r2 = x.iter().map(|v| v * v).sum::<f64>();
                let d = 2.0 * amplitude / ((1.0 + r2) * (1.0 + r2));
                x.iter().map(|v| d * v).collect()
            }
            Self::Sum { terms } => {
                let mut g = vec![0.0; x.len()];
                for t in terms {
                    for (a, b) in g.iter_mut().zip(t.gradient(x)) {
                        *a += b;
                    }
                }
                g
            }
            Self::Dilated { base, factor } => {
                let y: Vec<f64> = x.iter().map(|v| v / factor).collect();
                base.gradient(&y)
            }
            Self::Gridded(g) => vec![g.derivative(x[0])],
        }
    }

    /// sup |f| over ℝ^{n-1}, when finite.
    pub fn sup_bound(&self) -> Option<f64> {
        match self {
            Self::Constant { value } => Some(value.abs()),
            Self::Linear { slope, offset } => {
                slope.iter().all(|v| *v == 0.0).then_some(offset.abs())
            }
            Self::Sine { amplitude, .. } => Some(amplitude.abs()),
            Self::Power { coefficient, .. } => (*coefficient == 0.0).then_some(0.0),
            Self::Rational { amplitude } => Some(amplitude.abs()),
            Self::Sum { terms } => terms.iter().map(|t| t.sup_bound()).sum(),
            Self::Dilated { base, factor } => base.sup_bound().map(|b| b * factor.abs()),
            Self::Gridded(g) => g.exterior.sup_bound().map(|b| {
                g.values.iter().fold(b, |m, v| m.max(v.abs())) * 1.5
            }),
        }
    }

    /// Characteristic horizontal length over which f varies.
    pub fn length_scale(&self) -> f64 {
        match self {
            Self::Constant { .. } | Self::Linear { .. } => f64::INFINITY,
            Self::Sine { wavevector, .. } => {
                let k = norm(wavevector);
                if k == 0.0 {
                    f64::INFINITY
                } else {
                    1.0 / k
                }
            }
            Self::Power { .. } | Self::Rational { .. } => 1.0,
            Self::Sum { terms } => terms
                .iter()
                .map(|t| t.length_scale())
                .fold(f64::INFINITY, f64::min),
            Self::Dilated { base, factor } => base.length_scale() * factor.abs(),
            Self::Gridded(g) => g.spacing().min(g.exterior.length_scale()),
        }
    }

    /// One horizontal dimension: (m, B) with f(x) = m·x + b(x) and |b| ≤ B.
    /// None when f is not a bounded perturbation of a linear function.
    pub fn affine_split(&self) -> Option<(f64, f64)> {
        match self {
            Self::Constant { value } => Some((0.0, value.abs())),
            Self::Linear { slope, offset } => Some((slope.first().copied().unwrap_or(0.0), offset.abs())),
            Self::Sine { amplitude, .. } | Self::Rational { amplitude } => Some((0.0, amplitude.abs())),
            Self::Power { coefficient, .. } => (*coefficient == 0.0).then_some((0.0, 0.0)),
            Self::Sum { terms } => terms.iter().try_fold((0.0, 0.0), |(m, b), t| {
                let (tm, tb) = t.affine_split()?;
                Some((m + tm, b + tb))
            }),
            Self::Dilated { base, factor } => base.affine_split().map(|(m, b)| (m, b * factor.abs())),
            Self::Gridded(g) => {
                let (m, b) = g.exterior.affine_split()?;
                let inner = g
                    .nodes()
                    .iter()
                    .zip(&g.values)
                    .fold(0.0f64, |acc, (x, v)| acc.max((v - m * x).abs()));
                Some((m, b.max(1.5 * inner)))
            }
        }
    }

    pub fn is_affine(&self) -> bool {
        match self {
            Self::Constant { .. } | Self::Linear { .. } => true,
            Self::Sine { amplitude, .. } => *amplitude == 0.0,
            Self::Power { coefficient, .. } => *coefficient == 0.0,
            Self::Rational { amplitude } => *amplitude == 0.0,
            Self::Sum { terms } => terms.iter().all(|t| t.is_affine()),
            Self::Dilated { base, .. } => base.is_affine(),
            Self::Gridded(_) => false,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cubic spline through `values` at the nodes x_i = -1 + 2i/(N-1), with end
/// slopes clamped to the exterior profile so the junction at |x| = 1 is C¹.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GriddedRaw", into = "GriddedRaw")]
pub struct GriddedProfile {
    pub values: Vec<f64>,
    pub exterior: Box<GraphProfile>,
    second: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GriddedRaw {
    values: Vec<f64>,
    exterior: Box<GraphProfile>,
}

impl TryFrom<GriddedRaw> for GriddedProfile {
    type Error = crate::error::Error;
    fn try_from(r: GriddedRaw) -> Result<Self> {
        Self::new(r.values, *r.exterior)
    }
}

impl From<GriddedProfile> for GriddedRaw {
    fn from(g: GriddedProfile) -> Self {
        GriddedRaw {
            values: g.values,
            exterior: g.exterior,
        }
    }
}

impl GriddedProfile {
    pub fn new(values: Vec<f64>, exterior: GraphProfile) -> Result<Self> {
        if values.len() < 3 {
            return Err(invalid("values", "need at least three nodes"));
        }
        let mut g = Self {
            values,
            exterior: Box::new(exterior),
            second: Vec::new(),
        };
        g.second = g.solve_second_derivatives();
        Ok(g)
    }

    /// Node abscissae.
    pub fn nodes(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.values.len()).map(|i| -1.0 + i as f64 * h).collect()
    }

    pub fn spacing(&self) -> f64 {
        2.0 / (self.values.len() - 1) as f64
    }

    /// Returns a copy with new node values (same grid and exterior).
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        let mut g = Self {
            values,
            exterior: self.exterior.clone(),
            second: Vec::new(),
        };
        g.second = g.solve_second_derivatives();
        g
    }

    fn solve_second_derivatives(&self) -> Vec<f64> {
        let n = self.values.len();
        let h = self.spacing();
        let y = &self.values;
        let d0 = self.exterior.gradient(&[-1.0])[0];
        let d1 = self.exterior.gradient(&[1.0])[0];
        // Clamped spline system for second derivatives M_i.
        let mut a = vec![h / 6.0; n];
        let mut b = vec![2.0 * h / 3.0; n];
        let mut c = vec![h / 6.0; n];
        let mut r = vec![0.0; n];
        b[0] = h / 3.0;
        c[0] = h / 6.0;
        r[0] = (y[1] - y[0]) / h - d0;
        b[n - 1] = h / 3.0;
        a[n - 1] = h / 6.0;
        r[n - 1] = d1 - (y[n - 1] - y[n - 2]) / h;
        for i in 1..n - 1 {
            r[i] = (y[i + 1] - 2.0 * y[i] + y[i - 1]) / h;
        }
        a[0] = 0.0;
        c[n - 1] = 0.0;
        thomas(&a, &b, &c, &r)
    }

    #[inline]
    fn locate(&self, x: f64) -> (usize, f64, f64) {
        let h = self.spacing();
        let n = self.values.len();
        let u = (x + 1.0) / h;
        let i = (u.floor() as isize).clamp(0, n as isize - 2) as usize;
        let xl = -1.0 + i as f64 * h;
        let t = (x - xl) / h;
        (i, t, h)
    }

    pub fn eval(&self, x: f64) -> f64 {
        if !(-1.0..=1.0).contains(&x) {
            return self.exterior.eval(&[x]);
        }
        let (i, t, h) = self.locate(x);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        let a = 1.0 - t;
        a * y0 + t * y1 + h * h / 6.0 * ((a * a * a - a) * m0 + (t * t * t - t) * m1)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        if !(-1.0..=1.0).contains(&x) {
            return self.exterior.gradient(&[x])[0];
        }
        let (i, t, h) = self.locate(x);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        let a = 1.0 - t;
        (y1 - y0) / h + h / 6.0 * (-(3.0 * a * a - 1.0) * m0 + (3.0 * t * t - 1.0) * m1)
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        if !(-1.0..=1.0).contains(&x) {
            let h = 1e-5;
            return (self.exterior.eval(&[x + h]) - 2.0 * self.exterior.eval(&[x])
                + self.exterior.eval(&[x - h]))
                / (h * h);
        }
        let (i, t, _) = self.locate(x);
        (1.0 - t) * self.second[i] + t * self.second[i + 1]
    }
}

/// Tridiagonal solve; `a` is the sub-diagonal (a[0] unused), `c` the
/// super-diagonal (c[n-1] unused).
pub(crate) fn thomas(a: &[f64], b: &[f64], c: &[f64], r: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c[0] / b[0];
    dp[0] = r[0] / b[0];
    for i in 1..n {
        let m = b[i] - a[i] * cp[i - 1];
        cp[i] = if i + 1 < n { c[i] / m } else { 0.0 };
        dp[i] = (r[i] - a[i] * dp[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spline_reproduces_cubic_exactly_with_clamped_ends() {
        let f = |x: f64| 0.3 * x * x * x - 0.2 * x * x + 0.1;
        let exterior = GraphProfile::Linear {
            slope: vec![0.0],
            offset: 0.0,
        };
        let n = 33;
        let xs: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect();
        let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let g = GriddedProfile::new(vals, exterior).unwrap();
        // interior accuracy away from clamped ends (exterior slope 0 ≠ f')
        for x in [-0.3, 0.0, 0.41] {
            assert!((g.eval(x) - f(x)).abs() < 1e-3);
        }
        // nodes are interpolated exactly
        for (x, v) in xs.iter().zip(&g.values) {
            assert!((g.eval(*x) - v).abs() < 1e-13);
        }
    }

    #[test]
    fn spline_junction_is_c1() {
        let ext = GraphProfile::sine_1d(0.05, 2.0, 0.0);
        let n = 17;
        let vals: Vec<f64> = (0..n)
            .map(|i| ext.eval1(-1.0 + 2.0 * i as f64 / (n - 1) as f64))
            .collect();
        let g = GriddedProfile::new(vals, ext.clone()).unwrap();
        for x in [-1.0, 1.0] {
            let inside = g.derivative(x * (1.0 - 1e-12));
            let outside = ext.gradient(&[x])[0];
            assert!((inside - outside).abs() < 1e-9);
        }
    }
}
