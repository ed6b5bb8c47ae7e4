use crate::error::{Error, Result};

/// Symmetric banded matrix, lower band stored row-wise: `band[i*(bw+1) + k]`
/// holds entry (i, i - bw + k).
#[derive(Debug, Clone)]
pub(crate) struct BandMatrix {
    pub n: usize,
    pub bw: usize,
    band: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            band: vec![0.0; n * (bw + 1)],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + self.bw - (i - j)
    }

    /// Adds `v` to entry (i, j) (and implicitly (j, i)).
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (a, b) = if i >= j { (i, j) } else { (j, i) };
        let k = self.idx(a, b);
        self.band[k] += v;
    }

    /// y = A x.
    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let j0 = i.saturating_sub(self.bw);
            let row = &self.band[i * (self.bw + 1)..(i + 1) * (self.bw + 1)];
            let off = self.bw - (i - j0);
            let mut acc = row[self.bw] * x[i];
            for (j, a) in (j0..i).zip(&row[off..self.bw]) {
                acc += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += acc;
        }
    }

    /// αA + D with D diagonal.
    pub fn scaled_plus_diag(&self, alpha: f64, d: &[f64]) -> Self {
        let mut out = self.clone();
        out.band.iter_mut().for_each(|v| *v *= alpha);
        for (i, di) in d.iter().enumerate() {
            let k = out.idx(i, i);
            out.band[k] += di;
        }
        out
    }
}

/// Banded Cholesky factor L with A = L Lᵀ.
#[derive(Debug, Clone)]
pub(crate) struct BandCholesky {
    l: BandMatrix,
}

impl BandCholesky {
    pub fn factor(a: &BandMatrix) -> Result<Self> {
        let n = a.n;
        let bw = a.bw;
        let mut l = a.clone();
        let w = bw + 1;
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut sum = l.band[i * w + bw - (i - j)];
                let ri = i * w + bw - i;
                let rj = j * w + bw - j;
                for k in k0..j {
                    sum -= l.band[ri + k] * l.band[rj + k];
                }
                if i == j {
                    if !(sum > 0.0) {
                        return Err(Error::NotSpd(format!("banded pivot {i} = {sum:e}")));
                    }
                    l.band[i * w + bw] = sum.sqrt();
                } else {
                    l.band[i * w + bw - (i - j)] = sum / l.band[j * w + bw];
                }
            }
        }
        Ok(Self { l })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.l.n;
        let bw = self.l.bw;
        let w = bw + 1;
        let b = &self.l.band;
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            let mut s = x[i];
            let ri = i * w + bw - i;
            for j in j0..i {
                s -= b[ri + j] * x[j];
            }
            x[i] = s / b[i * w + bw];
        }
        for i in (0..n).rev() {
            x[i] /= b[i * w + bw];
            let xi = x[i];
            let j0 = i.saturating_sub(bw);
            let ri = i * w + bw - i;
            for j in j0..i {
                x[j] -= b[ri + j] * xi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn matches_dense_solve() {
        let n = 30;
        let bw = 4;
        let mut a = BandMatrix::zeros(n, bw);
        let mut dense = DMatrix::zeros(n, n);
        for i in 0..n {
            a.add(i, i, 10.0 + i as f64 * 0.1);
            dense[(i, i)] += 10.0 + i as f64 * 0.1;
            for k in 1..=bw {
                if i >= k {
                    let v = -1.0 / (k as f64 + (i % 3) as f64);
                    a.add(i, i - k, v);
                    dense[(i, i - k)] += v;
                    dense[(i - k, i)] += v;
                }
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = rhs.clone();
        BandCholesky::factor(&a).unwrap().solve_in_place(&mut x);
        let expect = dense.clone().cholesky().unwrap().solve(&DVector::from_vec(rhs.clone()));
        for i in 0..n {
            assert!((x[i] - expect[i]).abs() < 1e-12);
        }
        let mut y = vec![0.0; n];
        a.mul(&x, &mut y);
        for i in 0..n {
            assert!((y[i] - rhs[i]).abs() < 1e-12);
        }
    }
}
