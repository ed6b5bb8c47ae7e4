//! The limit operator ∫ (f(x' + z') − f(x'))|z'|^{-(n−1)−(1+s)} dz' on
//! graphs over ℝ^{n−1}, and the growth condition |f| ≤ C(1 + |x'|^{1+α})
//! that makes its tail converge.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::quad::gl;

/// Sample radii for the growth check: 0 and a geometric sequence up to `extent`.
fn growth_radii(extent: f64) -> Vec<f64> {
    let mut r = vec![0.0];
    let mut t = 1e-3;
    while t < extent {
        r.push(t);
        t *= 1.25;
    }
    r.push(extent);
    r
}

fn sphere_directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        _ => (0..count)
            .map(|i| {
                let th = 2.0 * PI * i as f64 / count as f64;
                vec![th.cos(), th.sin()]
            })
            .collect(),
    }
}

/// |f(x')| ≤ C(1 + |x'|^{1+α}) at every sample with |x'| ≤ `extent`.
pub fn growth_check_on(f: &dyn Fn(&[f64]) -> f64, dim: usize, alpha: f64, c: f64, extent: f64) -> bool {
    let dirs = sphere_directions(dim, 16);
    growth_radii(extent).into_iter().all(|rho| {
        dirs.iter().all(|w| {
            let x: Vec<f64> = w.iter().map(|v| rho * v).collect();
            let v = f(&x);
            v.is_finite() && v.abs() <= c * (1.0 + rho.powf(1.0 + alpha))
        })
    })
}

/// Growth check on samples out to |x'| = 10⁶.
pub fn growth_check(f: &dyn Fn(&[f64]) -> f64, dim: usize, alpha: f64, c: f64) -> bool {
    growth_check_on(f, dim, alpha, c, 1e6)
}

/// Declared growth bound of the graph function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Growth {
    pub alpha: f64,
    pub c: f64,
}

/// Value with the inner-model and tail contributions reported separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitValue {
    pub value: f64,
    /// Bound on the part beyond the truncation radius.
    pub tail_bound: f64,
    pub truncation: f64,
}

/// Σ over antipodal pairs of f(x + ρω) + f(x − ρω) − 2f(x), integrated over
/// half the sphere of directions.
fn paired(f: &dyn Fn(&[f64]) -> f64, x: &[f64], fx: f64, rho: f64) -> f64 {
    match x.len() {
        1 => f(&[x[0] + rho]) + f(&[x[0] - rho]) - 2.0 * fx,
        _ => gl(16)
            .nodes_weights(0.0, PI)
            .map(|(th, w)| {
                let (s, c) = th.sin_cos();
                w * (f(&[x[0] + rho * c, x[1] + rho * s]) + f(&[x[0] - rho * c, x[1] - rho * s]) - 2.0 * fx)
            })
            .sum(),
    }
}

pub fn frac_laplacian_graph(f: &dyn Fn(&[f64]) -> f64, s: f64, x: &[f64], growth: Growth) -> Result<f64> {
    Ok(frac_laplacian_graph_with(f, s, x, growth, 1e-10)?.value)
}

/// PV of ∫ (f(x + z) − f(x))|z|^{-d-1-s} dz, d = dim of x, written as
/// ∫_0^∞ ρ^{-2-s} P(ρ) dρ with P the paired second difference. Dyadic
/// shells between ε and the truncation R; below ε the pair sum is
/// modelled as P(ε)(ρ/ε)², beyond R it is bounded by the growth law.
pub fn frac_laplacian_graph_with(
    f: &dyn Fn(&[f64]) -> f64,
    s: f64,
    x: &[f64],
    growth: Growth,
    tol: f64,
) -> Result<LimitValue> {
    let d = x.len();
    if !(1..=2).contains(&d) {
        return Err(Error::UnsupportedDimension(d + 1));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(invalid("s", "must lie in (0, 1)"));
    }
    if !(growth.alpha > 0.0 && growth.alpha < s) || !(growth.c > 0.0) {
        return Err(invalid("growth", "need 0 < alpha < s and C > 0"));
    }
    if !growth_check(f, d, growth.alpha, growth.c) {
        return Err(Error::Growth(format!(
            "|f| exceeds {}(1 + |x|^{}) on the sample grid",
            growth.c,
            1.0 + growth.alpha
        )));
    }
    let fx = f(x);
    // pair sum ≤ measure·[2C(1 + (|x| + ρ)^{1+α}) + 2|f(x)|]; integrate ρ^{-2-s} times it beyond R
    let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let half_sphere = if d == 1 { 1.0 } else { PI };
    let a = 1.0 + growth.alpha;
    let tail = |r: f64| {
        let lead = 2.0 * growth.c * 2f64.powf(a) * r.powf(a - 1.0 - s) / (1.0 + s - a);
        let rest = (2.0 * growth.c * (1.0 + 2f64.powf(a) * xn.powf(a)) + 2.0 * fx.abs()) * r.powf(-1.0 - s) / (1.0 + s);
        half_sphere * (lead + rest)
    };
    let mut big_r = 1.0f64.max(xn);
    while tail(big_r) > tol && big_r < 1e300 {
        big_r *= 2.0;
    }
    let eps = 1e-4;
    let rule = gl(10);
    let integrand = |rho: f64| rho.powf(-2.0 - s) * paired(f, x, fx, rho);
    let mut acc = paired(f, x, fx, eps) * eps.powf(-1.0 - s) / (1.0 - s);
    let mut lo = eps;
    while lo < big_r {
        let hi = (2.0 * lo).min(big_r);
        // split shells into unit-length pieces where the graph may oscillate
        let pieces = ((hi - lo).ceil() as usize).clamp(1, 1024);
        let h = (hi - lo) / pieces as f64;
        for i in 0..pieces {
            let a0 = lo + i as f64 * h;
            acc += rule.integrate(a0, a0 + h, integrand);
        }
        lo = hi;
    }
    Ok(LimitValue {
        value: acc,
        tail_bound: tail(big_r),
        truncation: big_r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn growth_examples() {
        assert!(growth_check(&|_| 0.0, 1, 0.3, 1e-9));
        assert!(!growth_check(&|x| x[0] * x[0], 1, 0.5, 1.0));
        assert!(growth_check(&|x| x[0] * x[0].abs().powf(0.3), 1, 0.5, 1.0));
    }

    #[test]
    fn linear_functions_vanish() {
        let g = Growth { alpha: 0.2, c: 10.0 };
        let v = frac_laplacian_graph(&|x| 0.7 * x[0] - 0.2, 0.5, &[0.3], g).unwrap();
        assert!(v.abs() < 1e-9, "{v}");
        let v = frac_laplacian_graph(&|x| 0.3 * x[0] + 0.4 * x[1] + 1.0, 0.5, &[0.1, -0.2], g).unwrap();
        assert!(v.abs() < 1e-9, "{v}");
    }

    #[test]
    fn cosine_is_an_eigenfunction() {
        // ∫_ℝ (cos(x+z) − cos x)|z|^{-2-s} dz = −A_{1+s} cos x
        let s = 0.5;
        let g = Growth { alpha: 0.25, c: 1.0 };
        let v = frac_laplacian_graph_with(&|x| x[0].cos(), s, &[0.4], g, 1e-9).unwrap();
        let expect = -crate::special::cosine_symbol(1.0 + s) * 0.4f64.cos();
        assert!((v.value - expect).abs() < 1e-6, "{} {}", v.value, expect);
    }

    #[test]
    fn quadratic_rejected() {
        let g = Growth { alpha: 0.25, c: 1.0 };
        assert!(matches!(frac_laplacian_graph(&|x| x[0] * x[0], 0.5, &[0.0], g), Err(Error::Growth(_))));
    }
}
