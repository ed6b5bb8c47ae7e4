//! Closed-form constants.

use statrs::function::gamma::{gamma, gamma_lr, gamma_ur};
use std::f64::consts::PI;

/// C_{n,s} = 2^s π^{-n/2} Γ((n+s)/2), the constant in K(x,y) = C_{n,s}|x−y|^{-(n+s)}
/// for K = ∫ t^{-1-s/2} H dt.
pub fn cns(n: usize, s: f64) -> f64 {
    2f64.powf(s) * PI.powf(-(n as f64) / 2.0) * gamma((n as f64 + s) / 2.0)
}

/// Surface area of the unit sphere S^{n-1} ⊂ ℝⁿ (2 for n = 1).
pub fn sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma(n as f64 / 2.0)
}

/// Upper incomplete gamma Γ(a, x).
pub fn upper_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return gamma(a);
    }
    gamma_ur(a, x) * gamma(a)
}

/// Lower incomplete gamma γ(a, x).
pub fn lower_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    gamma_lr(a, x) * gamma(a)
}

/// A_β = 2(−Γ(−β) cos(πβ/2)) = ∫_ℝ (1 − cos z)|z|^{-1-β} dz for β ∈ (1, 2).
pub fn cosine_symbol(beta: f64) -> f64 {
    2.0 * (-gamma(-beta) * (PI * beta / 2.0).cos())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cns_reference_value() {
        assert!((cns(1, 0.5) - 0.977_741_067_446_923_9).abs() < 1e-14);
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-14);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-13);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn cosine_symbol_matches_quadrature() {
        let beta = 1.5;
        // 2 ∫_0^∞ (1 − cos z) z^{-1-β} dz by panels
        let rule = crate::quad::gl(40);
        let mut acc = 0.0;
        let mut a: f64 = 1e-8;
        // small-z part by series: ∫_0^a z^{1-β}/2 dz
        acc += a.powf(2.0 - beta) / (2.0 * (2.0 - beta));
        while a < 2000.0 {
            let b = (a * 1.5).min(a + 0.5);
            acc += rule.integrate(a, b, |z| 2.0 * (0.5 * z).sin().powi(2) * z.powf(-1.0 - beta));
            a = b;
        }
        acc += 2000f64.powf(-beta) / beta;
        assert!((2.0 * acc - cosine_symbol(beta)).abs() < 1e-5, "{} {}", 2.0 * acc, cosine_symbol(beta));
    }
}
