use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::chart::ChartSpec;
use super::grid::VerificationGrid;
use super::matrix::{sym_op_norm, SpdMatrix};
use crate::error::{invalid, Error, Result};

const FD_STEP: f64 = 1e-5;

/// A smooth field of SPD matrices on ℝⁿ drawn from a closed-form family.
///
/// `‖Dg(x)‖` is measured as `sqrt(Σ_k ‖∂_k g(x)‖²)` with `‖·‖` the spectral
/// norm, which dominates the operator norm of every directional derivative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MetricField {
    Constant {
        matrix: SpdMatrix,
    },
    /// g(x) = (1 + a·exp(-|x - c|² / w²)) Id
    ConformalBump {
        dim: usize,
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
    },
    /// g_ii(x) = 1 + a_i sin(k_i x_i + φ_i), off-diagonal entries zero.
    DiagonalSinusoidal {
        amplitudes: Vec<f64>,
        frequencies: Vec<f64>,
        phases: Vec<f64>,
    },
    /// g(x) = base(x / scale): the base metric zoomed to length `scale`.
    Rescaled { base: Box<MetricField>, scale: f64 },
    /// Push-forward of `base` by x ↦ Q x + shift with Q orthogonal.
    Isometric {
        base: Box<MetricField>,
        rotation: Vec<Vec<f64>>,
        shift: Vec<f64>,
    },
    /// φ*g for a closed-form chart φ.
    Pullback {
        chart: ChartSpec,
        base: Box<MetricField>,
    },
}

impl MetricField {
    pub fn euclidean(n: usize) -> Self {
        Self::Constant {
            matrix: SpdMatrix::identity(n),
        }
    }

    pub fn constant(matrix: SpdMatrix) -> Self {
        Self::Constant { matrix }
    }

    /// g(x) = (1 + a sin(k x + φ)) in one dimension.
    pub fn sinusoidal_1d(amplitude: f64, frequency: f64, phase: f64) -> Self {
        Self::DiagonalSinusoidal {
            amplitudes: vec![amplitude],
            frequencies: vec![frequency],
            phases: vec![phase],
        }
    }

    pub fn rescaled(self, scale: f64) -> Self {
        Self::Rescaled {
            base: Box::new(self),
            scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Constant { .. } => Ok(()),
            Self::ConformalBump {
                dim,
                amplitude,
                center,
                width,
            } => {
                if center.len() != *dim {
                    return Err(Error::Dimension {
                        expected: *dim,
                        got: center.len(),
                    });
                }
                if *width <= 0.0 {
                    return Err(invalid("width", "must be positive"));
                }
                if *amplitude <= -1.0 {
                    return Err(invalid("amplitude", "must exceed -1 to stay positive definite"));
                }
                Ok(())
            }
            Self::DiagonalSinusoidal {
                amplitudes,
                frequencies,
                phases,
            } => {
                if amplitudes.is_empty()
                    || amplitudes.len() != frequencies.len()
                    || amplitudes.len() != phases.len()
                {
                    return Err(invalid("amplitudes", "family vectors must share a nonzero length"));
                }
                if amplitudes.iter().any(|a| a.abs() >= 1.0) {
                    return Err(invalid("amplitudes", "|a_i| must be below 1"));
                }
                Ok(())
            }
            Self::Rescaled { base, scale } => {
                if *scale <= 0.0 {
                    return Err(invalid("scale", "must be positive"));
                }
                base.validate()
            }
            Self::Isometric {
                base,
                rotation,
                shift,
            } => {
                let n = base.dim();
                if rotation.len() != n || shift.len() != n || rotation.iter().any(|r| r.len() != n) {
                    return Err(Error::Dimension {
                        expected: n,
                        got: rotation.len(),
                    });
                }
                let q = DMatrix::from_fn(n, n, |i, j| rotation[i][j]);
                let err = (q.transpose() * &q - DMatrix::identity(n, n)).amax();
                if err > 1e-10 {
                    return Err(invalid("rotation", "must be orthogonal"));
                }
                base.validate()
            }
            Self::Pullback { chart, base } => {
                if chart.dim() != base.dim() {
                    return Err(Error::Dimension {
                        expected: base.dim(),
                        got: chart.dim(),
                    });
                }
                chart.validate()?;
                base.validate()
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Constant { matrix } => matrix.dim(),
            Self::ConformalBump { dim, .. } => *dim,
            Self::DiagonalSinusoidal { amplitudes, .. } => amplitudes.len(),
            Self::Rescaled { base, .. } | Self::Isometric { base, .. } => base.dim(),
            Self::Pullback { chart, .. } => chart.dim(),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Self::Constant { .. } => true,
            Self::ConformalBump { amplitude, .. } => *amplitude == 0.0,
            Self::DiagonalSinusoidal {
                amplitudes,
                frequencies,
                ..
            } => amplitudes
                .iter()
                .zip(frequencies)
                .all(|(a, k)| *a == 0.0 || *k == 0.0),
            Self::Rescaled { base, .. } | Self::Isometric { base, .. } => base.is_constant(),
            Self::Pullback { chart, base } => chart.is_linear() && base.is_constant(),
        }
    }

    /// g(x) as a raw matrix.
    pub fn eval_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        match self {
            Self::Constant { matrix } => matrix.matrix().clone(),
            Self::ConformalBump {
                dim,
                amplitude,
                center,
                width,
            } => {
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                DMatrix::identity(*dim, *dim) * (1.0 + amplitude * (-r2 / (width * width)).exp())
            }
            Self::DiagonalSinusoidal {
                amplitudes,
                frequencies,
                phases,
            } => {
                let n = amplitudes.len();
                DMatrix::from_fn(n, n, |i, j| {
                    if i == j {
                        1.0 + amplitudes[i] * (frequencies[i] * x[i] + phases[i]).sin()
                    } else {
                        0.0
                    }
                })
            }
            Self::Rescaled { base, scale } => {
                let y: Vec<f64> = x.iter().map(|v| v / scale).collect();
                base.eval_matrix(&y)
            }
            Self::Isometric {
                base,
                rotation,
                shift,
            } => {
                let n = base.dim();
                let q = DMatrix::from_fn(n, n, |i, j| rotation[i][j]);
                // x = Q z + b  =>  z = Qᵀ (x - b)
                let z: Vec<f64> = (0..n)
                    .map(|j| (0..n).map(|i| q[(i, j)] * (x[i] - shift[i])).sum())
                    .collect();
                &q * base.eval_matrix(&z) * q.transpose()
            }
            Self::Pullback { chart, base } => {
                let j = chart.jacobian(x);
                let gx = base.eval_matrix(&chart.apply(x));
                j.transpose() * gx * j
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> SpdMatrix {
        SpdMatrix::trusted(self.eval_matrix(x))
    }

    /// sqrt(det g(x)), the density of dV_g against Lebesgue measure.
    pub fn volume_density(&self, x: &[f64]) -> f64 {
        let m = self.eval_matrix(x);
        if m.nrows() == 1 {
            return m[(0, 0)].sqrt();
        }
        m.determinant().sqrt()
    }

    /// ∂_k g(x).
    pub fn partial(&self, x: &[f64], k: usize) -> DMatrix<f64> {
        match self {
            Self::Constant { matrix } => DMatrix::zeros(matrix.dim(), matrix.dim()),
            Self::ConformalBump {
                dim,
                amplitude,
                center,
                width,
            } => {
                let w2 = width * width;
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                let d = amplitude * (-r2 / w2).exp() * (-2.0 * (x[k] - center[k]) / w2);
                DMatrix::identity(*dim, *dim) * d
            }
            Self::DiagonalSinusoidal {
                amplitudes,
                frequencies,
                phases,
            } => {
                let n = amplitudes.len();
                let mut m = DMatrix::zeros(n, n);
                m[(k, k)] = amplitudes[k] * frequencies[k] * (frequencies[k] * x[k] + phases[k]).cos();
                m
            }
            Self::Rescaled { base, scale } => {
                let y: Vec<f64> = x.iter().map(|v| v / scale).collect();
                base.partial(&y, k) / *scale
            }
            _ => {
                let h = FD_STEP;
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[k] += h;
                xm[k] -= h;
                (self.eval_matrix(&xp) - self.eval_matrix(&xm)) / (2.0 * h)
            }
        }
    }

    /// ‖Dg(x)‖ = sqrt(Σ_k ‖∂_k g(x)‖²).
    pub fn grad_norm(&self, x: &[f64]) -> f64 {
        (0..self.dim())
            .map(|k| sym_op_norm(&self.partial(x, k)).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Closed-form sup of ‖Dg‖ over ℝⁿ when the family provides one.
    pub fn grad_bound(&self) -> Option<f64> {
        match self {
            Self::Constant { .. } => Some(0.0),
            Self::ConformalBump {
                amplitude, width, ..
            } => Some(amplitude.abs() * 2f64.sqrt() / width * (-0.5f64).exp()),
            Self::DiagonalSinusoidal {
                amplitudes,
                frequencies,
                ..
            } => Some(
                amplitudes
                    .iter()
                    .zip(frequencies)
                    .map(|(a, k)| (a * k).powi(2))
                    .sum::<f64>()
                    .sqrt(),
            ),
            Self::Rescaled { base, scale } => base.grad_bound().map(|b| b / scale),
            Self::Isometric { base, .. } => base.grad_bound(),
            Self::Pullback { .. } => None,
        }
    }

    /// Closed-form ellipticity bounds (lower, upper) when available.
    pub fn ellipticity_bounds(&self) -> Option<(f64, f64)> {
        match self {
            Self::Constant { matrix } => Some(matrix.eigen_bounds()),
            Self::ConformalBump { amplitude, .. } => {
                Some((1f64.min(1.0 + amplitude), 1f64.max(1.0 + amplitude)))
            }
            Self::DiagonalSinusoidal { amplitudes, .. } => {
                let a = amplitudes.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                Some((1.0 - a, 1.0 + a))
            }
            Self::Rescaled { base, .. } | Self::Isometric { base, .. } => base.ellipticity_bounds(),
            Self::Pullback { .. } => None,
        }
    }

    /// Inverse metric times sqrt(det g), the divergence-form coefficient.
    pub fn diffusion_tensor(&self, x: &[f64]) -> DMatrix<f64> {
        let g = self.eval_matrix(x);
        let n = g.nrows();
        if n == 1 {
            let v = g[(0, 0)];
            return DMatrix::from_element(1, 1, 1.0 / v.sqrt());
        }
        let det = g.determinant();
        let inv = g.cholesky().expect("metric must be SPD").inverse();
        inv * det.sqrt()
    }
}

/// Outcome of an admissibility check on a verification grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub pass: bool,
    /// Extremal sampled eigenvalues (min, max).
    pub worst_ellipticity: (f64, f64),
    /// Largest sampled ‖Dg‖.
    pub worst_lipschitz: f64,
    pub r: f64,
    pub grid: VerificationGrid,
    pub samples: usize,
}

/// Checks ½ ≤ g ≤ 2 and r‖Dg‖ ≤ 1 at every point of `grid`.
pub fn check_admissible(
    metric: &MetricField,
    r: f64,
    grid: &VerificationGrid,
) -> Result<AdmissibilityReport> {
    if r <= 0.0 || !r.is_finite() {
        return Err(invalid("r", "must be positive"));
    }
    metric.validate()?;
    let pts = grid.points()?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut lip = 0.0f64;
    for p in &pts {
        let (a, b) = metric.eval(p).eigen_bounds();
        lo = lo.min(a);
        hi = hi.max(b);
        lip = lip.max(metric.grad_norm(p));
    }
    let tol = 1e-12;
    let pass = lo >= 0.5 - tol && hi <= 2.0 + tol && r * lip <= 1.0 + tol;
    Ok(AdmissibilityReport {
        pass,
        worst_ellipticity: (lo, hi),
        worst_lipschitz: lip,
        r,
        grid: grid.clone(),
        samples: pts.len(),
    })
}

/// The default verification grid for a metric: a ball around the origin
/// covering one period of every sinusoidal factor (radius at least 4).
pub fn default_grid_for(metric: &MetricField) -> VerificationGrid {
    fn reach(m: &MetricField) -> f64 {
        match m {
            MetricField::DiagonalSinusoidal { frequencies, .. } => frequencies
                .iter()
                .filter(|k| **k != 0.0)
                .map(|k| 2.0 * std::f64::consts::PI / k.abs())
                .fold(4.0, f64::max),
            MetricField::ConformalBump { center, width, .. } => {
                center.iter().map(|c| c.abs()).fold(0.0, f64::max) + 4.0 * width
            }
            MetricField::Rescaled { base, scale } => reach(base) * scale,
            MetricField::Isometric { base, shift, .. } => {
                reach(base) + shift.iter().map(|v| v * v).sum::<f64>().sqrt()
            }
            MetricField::Pullback { chart, .. } => chart.radius,
            MetricField::Constant { .. } => 1.0,
        }
    }
    let r = reach(metric);
    VerificationGrid::centered(metric.dim(), r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_admissible() {
        let m = MetricField::euclidean(2);
        for r in [0.1, 0.5, 1.0] {
            let rep = check_admissible(&m, r, &VerificationGrid::centered(2, 1.0)).unwrap();
            assert!(rep.pass);
            assert_eq!(rep.worst_ellipticity, (1.0, 1.0));
            assert_eq!(rep.worst_lipschitz, 0.0);
        }
    }

    #[test]
    fn three_identity_fails_upper_bound() {
        let m = MetricField::constant(SpdMatrix::scaled_identity(2, 3.0).unwrap());
        let rep = check_admissible(&m, 1.0, &VerificationGrid::centered(2, 1.0)).unwrap();
        assert!(!rep.pass);
        assert_eq!(rep.worst_ellipticity.1, 3.0);
    }

    #[test]
    fn sinusoidal_lipschitz_matches_derivative() {
        let m = MetricField::sinusoidal_1d(0.4, 1.0, 0.0);
        let grid = VerificationGrid::new(vec![0.0], std::f64::consts::PI, std::f64::consts::PI / 64.0);
        let rep = check_admissible(&m, 1.0, &grid).unwrap();
        assert!(rep.pass);
        // cos attains 1 at the grid point x = 0
        assert!((rep.worst_lipschitz - 0.4).abs() < 1e-12);
        // finite differences agree with the closed form derivative
        for x in [-1.3, 0.2, 2.9] {
            let h = 1e-6;
            let fd = (m.eval_matrix(&[x + h])[(0, 0)] - m.eval_matrix(&[x - h])[(0, 0)]) / (2.0 * h);
            assert!((fd - m.partial(&[x], 0)[(0, 0)]).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_bad_radius_and_empty_grid() {
        let m = MetricField::euclidean(1);
        assert!(check_admissible(&m, 0.0, &VerificationGrid::centered(1, 1.0)).is_err());
        let empty = VerificationGrid::new(vec![0.0], 1.0, 0.0);
        assert!(matches!(check_admissible(&m, 1.0, &empty), Err(Error::EmptyGrid)));
    }

    #[test]
    fn grad_bound_dominates_sampled_gradients() {
        let fams = [
            MetricField::sinusoidal_1d(0.3, 2.0, 0.4),
            MetricField::ConformalBump {
                dim: 2,
                amplitude: 0.5,
                center: vec![0.1, -0.2],
                width: 0.7,
            },
            MetricField::DiagonalSinusoidal {
                amplitudes: vec![0.2, 0.3],
                frequencies: vec![1.0, 3.0],
                phases: vec![0.0, 1.0],
            }
            .rescaled(0.5),
        ];
        for m in fams {
            let bound = m.grad_bound().unwrap();
            let grid = default_grid_for(&m);
            for p in grid.points().unwrap().iter().step_by(7) {
                assert!(m.grad_norm(p) <= bound * (1.0 + 1e-9) + 1e-12);
            }
        }
    }
}
