use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::banded::{BandCholesky, BandMatrix};
use crate::error::{invalid, Error, Result};
use crate::geometry::MetricField;

/// Uniform node lattice `origin + h·k`, k ∈ [0, shape).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatGrid {
    pub origin: Vec<f64>,
    pub h: f64,
    pub shape: Vec<usize>,
}

impl HeatGrid {
    /// Smallest lattice (aligned to multiples of h) covering [lower, upper].
    pub fn covering(lower: &[f64], upper: &[f64], h: f64) -> Self {
        let origin: Vec<f64> = lower.iter().map(|l| (l / h).floor() * h).collect();
        let shape = upper
            .iter()
            .zip(&origin)
            .map(|(u, o)| ((u - o) / h).ceil() as usize + 1)
            .collect();
        Self {
            origin,
            h,
            shape,
        }
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coords(&self, idx: usize) -> Vec<f64> {
        let mut rem = idx;
        let mut out = Vec::with_capacity(self.dim());
        for (d, &m) in self.shape.iter().enumerate() {
            out.push(self.origin[d] + (rem % m) as f64 * self.h);
            rem /= m;
        }
        out
    }

    fn multi(&self, idx: usize) -> Vec<usize> {
        let mut rem = idx;
        self.shape
            .iter()
            .map(|&m| {
                let k = rem % m;
                rem /= m;
                k
            })
            .collect()
    }

    fn flat(&self, k: &[usize]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for (d, &m) in self.shape.iter().enumerate() {
            idx += k[d] * stride;
            stride *= m;
        }
        idx
    }

    pub fn lower(&self) -> Vec<f64> {
        self.origin.clone()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.origin
            .iter()
            .zip(&self.shape)
            .map(|(o, &m)| o + (m - 1) as f64 * self.h)
            .collect()
    }

    /// Multilinear interpolation weights of the point x: (node, weight).
    pub fn weights(&self, x: &[f64]) -> Option<Vec<(usize, f64)>> {
        let n = self.dim();
        let mut base = Vec::with_capacity(n);
        let mut frac = Vec::with_capacity(n);
        for d in 0..n {
            let u = (x[d] - self.origin[d]) / self.h;
            if u < -1e-9 || u > (self.shape[d] - 1) as f64 + 1e-9 {
                return None;
            }
            let k = (u.floor().max(0.0) as usize).min(self.shape[d] - 2);
            base.push(k);
            frac.push((u - k as f64).clamp(0.0, 1.0));
        }
        let mut out = Vec::with_capacity(1 << n);
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut k = base.clone();
            for d in 0..n {
                if corner >> d & 1 == 1 {
                    k[d] += 1;
                    w *= frac[d];
                } else {
                    w *= 1.0 - frac[d];
                }
            }
            if w != 0.0 {
                out.push((self.flat(&k), w));
            }
        }
        Some(out)
    }

    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> Option<f64> {
        self.weights(x)
            .map(|w| w.iter().map(|(i, a)| a * values[*i]).sum())
    }

    fn on_wall(&self, idx: usize) -> bool {
        self.multi(idx)
            .iter()
            .zip(&self.shape)
            .any(|(&k, &m)| k == 0 || k + 1 == m)
    }
}

/// Lumped-mass multilinear finite elements for
/// ∂ₜu = |g|^{-1/2} ∂ᵢ(√|g| gⁱʲ ∂ⱼu) with homogeneous Dirichlet data on the
/// box walls and on every node where `active` is false.
pub(crate) struct Discretization {
    pub grid: HeatGrid,
    /// Lumped mass h^n √|g(xᵢ)| (1 on inactive nodes).
    pub mass: Vec<f64>,
    pub stiffness: BandMatrix,
    pub active: Vec<bool>,
    factors: HashMap<u64, BandCholesky>,
}

fn reference_gradients(n: usize) -> Vec<DMatrix<f64>> {
    // entry k*n + l holds ∫ ∂_k φ_a ∂_l φ_b over the unit cell
    let corners = 1usize << n;
    let gauss = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
    let mut out = vec![DMatrix::zeros(corners, corners); n * n];
    let npts = 1usize << n;
    for q in 0..npts {
        let xi: Vec<f64> = (0..n).map(|d| gauss[q >> d & 1]).collect();
        let w = 1.0 / npts as f64;
        let grads: Vec<Vec<f64>> = (0..corners)
            .map(|a| {
                (0..n)
                    .map(|k| {
                        let mut g = 1.0;
                        for d in 0..n {
                            let on = a >> d & 1 == 1;
                            let v = if d == k {
                                if on {
                                    1.0
                                } else {
                                    -1.0
                                }
                            } else if on {
                                xi[d]
                            } else {
                                1.0 - xi[d]
                            };
                            g *= v;
                        }
                        g
                    })
                    .collect()
            })
            .collect();
        for k in 0..n {
            for l in 0..n {
                for a in 0..corners {
                    for b in 0..corners {
                        out[k * n + l][(a, b)] += w * grads[a][k] * grads[b][l];
                    }
                }
            }
        }
    }
    out
}

impl Discretization {
    pub fn new(metric: &MetricField, grid: HeatGrid, mask: impl Fn(&[f64]) -> bool) -> Result<Self> {
        let n = grid.dim();
        if !(1..=2).contains(&n) {
            return Err(Error::UnsupportedDimension(n));
        }
        if metric.dim() != n {
            return Err(Error::Dimension {
                expected: n,
                got: metric.dim(),
            });
        }
        if grid.shape.iter().any(|&m| m < 3) {
            return Err(invalid("h", "grid too coarse for the box"));
        }
        let total = grid.len();
        let bw = if n == 1 { 1 } else { grid.shape[0] + 1 };
        let active: Vec<bool> = (0..total)
            .map(|i| !grid.on_wall(i) && mask(&grid.coords(i)))
            .collect();
        let hn = grid.h.powi(n as i32);
        let mass: Vec<f64> = (0..total)
            .map(|i| {
                if active[i] {
                    hn * metric.volume_density(&grid.coords(i))
                } else {
                    1.0
                }
            })
            .collect();
        let mut stiffness = BandMatrix::zeros(total, bw);
        let refs = reference_gradients(n);
        let scale = grid.h.powi(n as i32 - 2);
        let cells: Vec<usize> = grid.shape.iter().map(|m| m - 1).collect();
        let ncells: usize = cells.iter().product();
        let corners = 1usize << n;
        for c in 0..ncells {
            let mut rem = c;
            let ck: Vec<usize> = cells
                .iter()
                .map(|&m| {
                    let k = rem % m;
                    rem /= m;
                    k
                })
                .collect();
            let nodes: Vec<usize> = (0..corners)
                .map(|a| {
                    let k: Vec<usize> = (0..n).map(|d| ck[d] + (a >> d & 1)).collect();
                    grid.flat(&k)
                })
                .collect();
            if nodes.iter().all(|&i| !active[i]) {
                continue;
            }
            let center: Vec<f64> = (0..n)
                .map(|d| grid.origin[d] + (ck[d] as f64 + 0.5) * grid.h)
                .collect();
            let a = metric.diffusion_tensor(&center);
            for p in 0..corners {
                let i = nodes[p];
                if !active[i] {
                    continue;
                }
                for q in 0..=p {
                    let j = nodes[q];
                    if !active[j] {
                        continue;
                    }
                    let mut v = 0.0;
                    for k in 0..n {
                        for l in 0..n {
                            v += a[(k, l)] * refs[k * n + l][(q, p)];
                        }
                    }
                    stiffness.add(i, j, v * scale);
                }
            }
        }
        Ok(Self {
            grid,
            mass,
            stiffness,
            active,
            factors: HashMap::new(),
        })
    }

    /// u ← (M + θτA)^{-1}((M − (1−θ)τA)u + τ M f), f optional forcing
    /// already θ-averaged.
    pub fn step(&mut self, u: &mut [f64], tau: f64, theta: f64, forcing: Option<&[f64]>) -> Result<()> {
        let key = (tau.to_bits()).wrapping_mul(31).wrapping_add(theta.to_bits());
        if !self.factors.contains_key(&key) {
            let lhs = self.stiffness.scaled_plus_diag(theta * tau, &self.mass);
            let f = BandCholesky::factor(&lhs)?;
            if self.factors.len() > 64 {
                self.factors.clear();
            }
            self.factors.insert(key, f);
        }
        let total = u.len();
        let mut au = vec![0.0; total];
        if theta < 1.0 {
            self.stiffness.mul(u, &mut au);
        }
        for i in 0..total {
            if !self.active[i] {
                u[i] = 0.0;
                continue;
            }
            let mut r = self.mass[i] * u[i] - (1.0 - theta) * tau * au[i];
            if let Some(f) = forcing {
                r += tau * self.mass[i] * f[i];
            }
            u[i] = r;
        }
        self.factors[&key].solve_in_place(u);
        for i in 0..total {
            if !self.active[i] {
                u[i] = 0.0;
            }
        }
        Ok(())
    }

    /// Σ mᵢ uᵢ over active nodes.
    pub fn mass_of(&self, u: &[f64]) -> f64 {
        u.iter()
            .zip(&self.mass)
            .zip(&self.active)
            .filter(|(_, a)| **a)
            .map(|((v, m), _)| v * m)
            .sum()
    }

    /// Discrete unit mass at x: u = M^{-1} w with w the interpolation weights.
    pub fn point_source(&self, x: &[f64]) -> Result<Vec<f64>> {
        let w = self
            .grid
            .weights(x)
            .ok_or_else(|| invalid("x0", "source outside the solver box"))?;
        let mut u = vec![0.0; self.grid.len()];
        for (i, a) in w {
            if self.active[i] {
                u[i] += a / self.mass[i];
            }
        }
        Ok(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_stiffness_1d() {
        let r = reference_gradients(1);
        assert!((r[0][(0, 0)] - 1.0).abs() < 1e-14);
        assert!((r[0][(0, 1)] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn reference_stiffness_2d_laplacian_rows_sum_to_zero() {
        let r = reference_gradients(2);
        let lap = &r[0] + &r[3];
        for a in 0..4 {
            assert!(lap.row(a).sum().abs() < 1e-14);
        }
        assert!((lap[(0, 0)] - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn weights_partition_unity() {
        let g = HeatGrid::covering(&[-1.0, -1.0], &[1.0, 1.0], 0.1);
        let w = g.weights(&[0.033, -0.51]).unwrap();
        let s: f64 = w.iter().map(|p| p.1).sum();
        assert!((s - 1.0).abs() < 1e-14);
        let vals: Vec<f64> = (0..g.len()).map(|i| {
            let c = g.coords(i);
            2.0 * c[0] - c[1] + 0.5
        }).collect();
        let v = g.interpolate(&vals, &[0.033, -0.51]).unwrap();
        assert!((v - (2.0 * 0.033 + 0.51 + 0.5)).abs() < 1e-12);
    }
}
