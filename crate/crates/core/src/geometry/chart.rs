use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::grid::VerificationGrid;
use super::matrix::sym_op_norm;
use super::metric::MetricField;
use crate::error::{invalid, Error, Result};

/// Closed-form diffeomorphisms B_R(0) → ℝⁿ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChartMap {
    Identity { dim: usize },
    Linear { matrix: Vec<Vec<f64>> },
    /// φ(x) = x + ε x |x|²
    Cubic { dim: usize, epsilon: f64 },
}

/// A chart φ on B_radius(0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub map: ChartMap,
    pub radius: f64,
}

impl ChartSpec {
    pub fn identity(dim: usize, radius: f64) -> Self {
        Self {
            map: ChartMap::Identity { dim },
            radius,
        }
    }

    pub fn cubic(dim: usize, epsilon: f64, radius: f64) -> Self {
        Self {
            map: ChartMap::Cubic { dim, epsilon },
            radius,
        }
    }

    pub fn dim(&self) -> usize {
        match &self.map {
            ChartMap::Identity { dim } | ChartMap::Cubic { dim, .. } => *dim,
            ChartMap::Linear { matrix } => matrix.len(),
        }
    }

    pub fn is_linear(&self) -> bool {
        !matches!(self.map, ChartMap::Cubic { epsilon, .. } if epsilon != 0.0)
    }

    /// Checks that φ is a diffeomorphism onto its image on B_radius(0).
    pub fn validate(&self) -> Result<()> {
        if self.radius <= 0.0 {
            return Err(invalid("radius", "chart radius must be positive"));
        }
        match &self.map {
            ChartMap::Identity { .. } => Ok(()),
            ChartMap::Linear { matrix } => {
                let n = matrix.len();
                if matrix.iter().any(|r| r.len() != n) {
                    return Err(invalid("matrix", "must be square"));
                }
                let a = DMatrix::from_fn(n, n, |i, j| matrix[i][j]);
                if a.determinant().abs() < 1e-14 {
                    return Err(invalid("matrix", "singular linear chart"));
                }
                Ok(())
            }
            ChartMap::Cubic { epsilon, .. } => {
                // φ = ∇(|x|²/2 + ε|x|⁴/4); its Hessian has eigenvalues 1 + ε|x|²
                // and 1 + 3ε|x|², so convexity on the ball gives injectivity.
                if 1.0 + 3.0 * epsilon.min(0.0) * self.radius * self.radius <= 0.0 {
                    return Err(invalid("epsilon", "cubic chart not injective on its ball"));
                }
                Ok(())
            }
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match &self.map {
            ChartMap::Identity { .. } => x.to_vec(),
            ChartMap::Linear { matrix } => matrix
                .iter()
                .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
                .collect(),
            ChartMap::Cubic { epsilon, .. } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                x.iter().map(|v| v + epsilon * v * r2).collect()
            }
        }
    }

    /// Dφ(x).
    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        match &self.map {
            ChartMap::Identity { .. } => DMatrix::identity(n, n),
            ChartMap::Linear { matrix } => DMatrix::from_fn(n, n, |i, j| matrix[i][j]),
            ChartMap::Cubic { epsilon, .. } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                DMatrix::from_fn(n, n, |i, j| {
                    let d = if i == j { 1.0 + epsilon * r2 } else { 0.0 };
                    d + 2.0 * epsilon * x[i] * x[j]
                })
            }
        }
    }

    /// The pulled-back metric φ*g as a metric field on ℝⁿ.
    pub fn pullback_metric(&self, base: &MetricField) -> MetricField {
        MetricField::Pullback {
            chart: self.clone(),
            base: Box::new(base.clone()),
        }
    }
}

/// Result of the FA check: both quantities are grid maxima over B_r.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlatnessAssumptionReport {
    pub pass: bool,
    /// max ‖φ*g − Id‖
    pub deviation: f64,
    /// r · max ‖D(φ*g)‖
    pub scaled_gradient: f64,
    pub grid: VerificationGrid,
}

/// Checks ‖φ*g − Id‖ ≤ 1/100 and r‖D φ*g‖ ≤ 1/100 on a grid over B_r(0).
pub fn check_flatness_assumption(
    chart: &ChartSpec,
    metric: &MetricField,
    r: f64,
    spacing: Option<f64>,
) -> Result<FlatnessAssumptionReport> {
    chart.validate()?;
    if r <= 0.0 {
        return Err(invalid("r", "must be positive"));
    }
    if r > chart.radius * (1.0 + 1e-12) {
        return Err(invalid("r", format!("exceeds chart radius {}", chart.radius)));
    }
    if metric.dim() != chart.dim() {
        return Err(Error::Dimension {
            expected: chart.dim(),
            got: metric.dim(),
        });
    }
    let grid = VerificationGrid::new(vec![0.0; chart.dim()], r, spacing.unwrap_or(r / 64.0));
    let pulled = chart.pullback_metric(metric);
    let n = chart.dim();
    let mut dev = 0.0f64;
    let mut grad = 0.0f64;
    for p in grid.points()? {
        let j = chart.jacobian(&p);
        if !j.iter().all(|v| v.is_finite()) || j.determinant() <= 0.0 {
            return Err(Error::ChartNotEvaluable {
                point: p,
                reason: "Jacobian singular or orientation-reversing".into(),
            });
        }
        let g = pulled.eval_matrix(&p);
        if !g.iter().all(|v| v.is_finite()) {
            return Err(Error::ChartNotEvaluable {
                point: p,
                reason: "pullback metric not finite".into(),
            });
        }
        dev = dev.max(sym_op_norm(&(g - DMatrix::identity(n, n))));
        grad = grad.max(pulled.grad_norm(&p));
    }
    let limit = 0.01 + 1e-12;
    Ok(FlatnessAssumptionReport {
        pass: dev <= limit && r * grad <= limit,
        deviation: dev,
        scaled_gradient: r * grad,
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SpdMatrix;

    #[test]
    fn identity_chart_on_euclidean_passes() {
        let c = ChartSpec::identity(2, 1.0);
        let rep = check_flatness_assumption(&c, &MetricField::euclidean(2), 1.0, Some(1.0 / 16.0)).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.deviation, 0.0);
    }

    #[test]
    fn slightly_scaled_metric_fails() {
        let c = ChartSpec::identity(2, 1.0);
        let g = MetricField::constant(SpdMatrix::scaled_identity(2, 1.02).unwrap());
        let rep = check_flatness_assumption(&c, &g, 1.0, Some(0.25)).unwrap();
        assert!(!rep.pass);
        assert!((rep.deviation - 0.02).abs() < 1e-12);
    }

    #[test]
    fn cubic_chart_matches_finite_difference_oracle() {
        let eps = 0.001;
        let c = ChartSpec::cubic(2, eps, 1.0);
        let spacing = 1.0 / 16.0;
        let rep = check_flatness_assumption(&c, &MetricField::euclidean(2), 1.0, Some(spacing)).unwrap();
        // Oracle: finite-difference Jacobian of φ, then max ‖JᵀJ − I‖ and
        // max sqrt(Σ_k ‖∂_k(JᵀJ)‖²) over the same grid.
        let phi = |x: &[f64]| -> Vec<f64> {
            let r2 = x[0] * x[0] + x[1] * x[1];
            vec![x[0] + eps * x[0] * r2, x[1] + eps * x[1] * r2]
        };
        let fd_jac = |x: &[f64]| -> DMatrix<f64> {
            let h = 1e-6;
            DMatrix::from_fn(2, 2, |i, j| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[j] += h;
                xm[j] -= h;
                (phi(&xp)[i] - phi(&xm)[i]) / (2.0 * h)
            })
        };
        let gram = |x: &[f64]| {
            let j = fd_jac(x);
            j.transpose() * j
        };
        let mut dev = 0.0f64;
        let mut grad = 0.0f64;
        for p in VerificationGrid::new(vec![0.0, 0.0], 1.0, spacing).points().unwrap() {
            dev = dev.max(sym_op_norm(&(gram(&p) - DMatrix::identity(2, 2))));
            let h = 1e-4;
            let mut acc = 0.0;
            for k in 0..2 {
                let mut xp = p.clone();
                let mut xm = p.clone();
                xp[k] += h;
                xm[k] -= h;
                acc += sym_op_norm(&((gram(&xp) - gram(&xm)) / (2.0 * h))).powi(2);
            }
            grad = grad.max(acc.sqrt());
        }
        assert!((rep.deviation - dev).abs() < 1e-6, "{} vs {}", rep.deviation, dev);
        assert!((rep.scaled_gradient - grad).abs() < 1e-5, "{} vs {}", rep.scaled_gradient, grad);
        assert_eq!(rep.pass, dev <= 0.01 && grad <= 0.01);
    }

    #[test]
    fn radius_beyond_chart_is_rejected() {
        let c = ChartSpec::identity(1, 0.5);
        assert!(check_flatness_assumption(&c, &MetricField::euclidean(1), 1.0, None).is_err());
    }
}
