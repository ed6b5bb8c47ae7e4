use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A symmetric positive-definite matrix, validated on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SpdMatrix(DMatrix<f64>);

impl SpdMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::NotSpd(format!("shape {}x{}", m.nrows(), m.ncols())));
        }
        let scale = m.amax().max(1e-300);
        for i in 0..m.nrows() {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::NotSpd(format!(
                        "asymmetric entries ({i},{j}) = {} vs {}",
                        m[(i, j)],
                        m[(j, i)]
                    )));
                }
            }
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotSpd("non-finite entry".into()));
        }
        let eig = SymmetricEigen::new(m.clone());
        let min = eig.eigenvalues.min();
        if min <= 0.0 {
            return Err(Error::NotSpd(format!("smallest eigenvalue {min:e} <= 0")));
        }
        Ok(Self(m))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn scaled_identity(n: usize, c: f64) -> Result<Self> {
        Self::new(DMatrix::identity(n, n) * c)
    }

    pub fn diagonal(d: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::NotSpd("ragged rows".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Wraps a matrix known to be SPD (e.g. a positive combination of SPD
    /// matrices) without re-checking it.
    pub(crate) fn trusted(m: DMatrix<f64>) -> Self {
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn det(&self) -> f64 {
        self.0.determinant()
    }

    pub fn sqrt_det(&self) -> f64 {
        self.det().sqrt()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.0.clone().cholesky().expect("spd").inverse()
    }

    /// Extreme eigenvalues (min, max).
    pub fn eigen_bounds(&self) -> (f64, f64) {
        if self.dim() == 1 {
            let v = self.0[(0, 0)];
            return (v, v);
        }
        let eig = SymmetricEigen::new(self.0.clone());
        (eig.eigenvalues.min(), eig.eigenvalues.max())
    }

    /// Symmetric square root.
    pub fn sqrt(&self) -> DMatrix<f64> {
        let eig = SymmetricEigen::new(self.0.clone());
        let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
        &eig.eigenvectors * d * eig.eigenvectors.transpose()
    }

    /// Quadratic form vᵀ g v.
    #[inline]
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += self.0[(i, j)] * v[j];
            }
            acc += v[i] * row;
        }
        acc
    }

    /// |v|_g = sqrt(vᵀ g v).
    #[inline]
    pub fn norm(&self, v: &[f64]) -> f64 {
        self.quad_form(v).sqrt()
    }
}

impl TryFrom<Vec<Vec<f64>>> for SpdMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<SpdMatrix> for Vec<Vec<f64>> {
    fn from(m: SpdMatrix) -> Self {
        (0..m.dim())
            .map(|i| (0..m.dim()).map(|j| m.0[(i, j)]).collect())
            .collect()
    }
}

/// Spectral norm of a symmetric matrix.
pub fn sym_op_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)].abs();
    }
    let eig = SymmetricEigen::new(m.clone());
    eig.eigenvalues.amax()
}

/// Metric norm of `v` for a raw matrix, validating that it is SPD.
pub fn metric_norm(g: &DMatrix<f64>, v: &[f64]) -> Result<f64> {
    let spd = SpdMatrix::new(g.clone())?;
    if v.len() != spd.dim() {
        return Err(Error::Dimension {
            expected: spd.dim(),
            got: v.len(),
        });
    }
    Ok(spd.norm(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_norm_examples() {
        let id = DMatrix::identity(2, 2);
        assert_eq!(metric_norm(&id, &[3.0, 4.0]).unwrap(), 5.0);
        let g = DMatrix::from_element(1, 1, 4.0);
        assert_eq!(metric_norm(&g, &[1.0]).unwrap(), 2.0);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.5]));
        assert!((metric_norm(&d, &[1.0, 0.0]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_spd() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(metric_norm(&bad, &[1.0, 0.0]), Err(Error::NotSpd(_))));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(SpdMatrix::new(asym).is_err());
    }

    #[test]
    fn sqrt_squares_back() {
        let g = SpdMatrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let r = g.sqrt();
        assert!((&r * &r - g.matrix()).amax() < 1e-13);
    }
}
