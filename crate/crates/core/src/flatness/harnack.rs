//! Harnack dichotomy at dyadic step k: after the hypothesis cylinders
//! ∂E ∩ B_{r2^{-l}} ⊂ {|xⁿ| ≤ r2^{-l(1+α)}}, l = 0..k, the boundary in
//! B_{r2^{-k}δ} must leave the top or the bottom δ²-fraction of the slab.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{cylinder_contains, norm, Cylinder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// ∂E ∩ B_{r2^{-k}δ} ⊂ {xⁿ ≤ a(1 − δ²)}
    Upper,
    /// ∂E ∩ B_{r2^{-k}δ} ⊂ {xⁿ ≥ −a(1 − δ²)}
    Lower,
    Neither,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DichotomyOutcome {
    pub branch: Branch,
    pub delta: f64,
    /// a = r2^{-k(1+α)}.
    pub half_width: f64,
    /// Radius r2^{-k}δ of the tested ball.
    pub ball_radius: f64,
    pub both_hold: bool,
    /// Highest and lowest sampled points in the ball; for `Neither` these
    /// violate the upper and lower inclusion respectively.
    pub witnesses: Vec<Vec<f64>>,
    /// Points in the tested ball.
    pub count: usize,
}

/// Points are given in the frame of the hypothesis: base point at the
/// origin, slab normal eₙ.
pub fn harnack_dichotomy_check(points: &[Vec<f64>], delta: f64, k: usize, alpha: f64, r: f64) -> Result<DichotomyOutcome> {
    let out = dichotomy(points, delta, k, alpha, r)?;
    if out.branch == Branch::Neither {
        log::error!("Harnack dichotomy fails at step {k} with delta = {delta}: calibration falsified");
    }
    Ok(out)
}

/// [`harnack_dichotomy_check`] without logging, for calibration searches.
pub(crate) fn dichotomy(points: &[Vec<f64>], delta: f64, k: usize, alpha: f64, r: f64) -> Result<DichotomyOutcome> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", "must lie in (0, 1)"));
    }
    if !(r > 0.0) || !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", "need r > 0 and 0 < alpha < 1"));
    }
    let n = points.first().map_or(0, |p| p.len());
    if n == 0 {
        return Err(Error::InsufficientSamples("empty point cloud".into()));
    }
    let origin = vec![0.0; n];
    let mut en = vec![0.0; n];
    en[n - 1] = 1.0;
    for l in 0..=k {
        let rad = r * 0.5f64.powi(l as i32);
        let w = r * 0.5f64.powf(l as f64 * (1.0 + alpha));
        let cyl = Cylinder::new(origin.clone(), en.clone(), rad, w)?;
        if !cylinder_contains(points, &cyl) {
            return Err(Error::Precondition {
                scale: l,
                reason: format!("boundary leaves the slab of half-width {w:e} in the ball of radius {rad:e}"),
            });
        }
    }
    let a = r * 0.5f64.powf(k as f64 * (1.0 + alpha));
    let ball_radius = r * 0.5f64.powi(k as i32) * delta;
    let level = a * (1.0 - delta * delta);
    let inside: Vec<&Vec<f64>> = points.iter().filter(|p| norm(p) <= ball_radius).collect();
    // an empty ball satisfies both inclusions
    let top = inside.iter().max_by(|p, q| p[n - 1].total_cmp(&q[n - 1]));
    let bottom = inside.iter().min_by(|p, q| p[n - 1].total_cmp(&q[n - 1]));
    let upper = top.is_none_or(|p| p[n - 1] <= level);
    let lower = bottom.is_none_or(|p| p[n - 1] >= -level);
    let branch = match (upper, lower) {
        (true, _) => Branch::Upper,
        (false, true) => Branch::Lower,
        (false, false) => Branch::Neither,
    };
    Ok(DichotomyOutcome {
        branch,
        delta,
        half_width: a,
        ball_radius,
        both_hold: upper && lower,
        witnesses: top.into_iter().chain(bottom).map(|p| p.to_vec()).collect(),
        count: inside.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(f: impl Fn(f64) -> f64, r: f64) -> Vec<Vec<f64>> {
        (0..=4000).map(|i| {
            let x = -r + 2.0 * r * i as f64 / 4000.0;
            vec![x, f(x)]
        }).collect()
    }

    #[test]
    fn constant_below_gives_upper() {
        let (k, alpha, r) = (2, 0.25, 1.0);
        let a = r * 0.5f64.powf(k as f64 * (1.0 + alpha));
        let out = harnack_dichotomy_check(&graph(|_| -0.9 * a, r), 0.3, k, alpha, r).unwrap();
        assert_eq!(out.branch, Branch::Upper);
    }

    #[test]
    fn oscillation_picks_branch_by_delta() {
        // a·sin(x/(δ r 2^{-k})) reaches ±a inside the ball only once δ is large
        let (k, alpha, r) = (1, 0.25, 1.0);
        let a = r * 0.5f64.powf(k as f64 * (1.0 + alpha));
        let lam = 0.3 * r * 0.5;
        let pts = graph(|x| a * (x / lam - 0.25).sin(), r);
        // ball radius 0.05: x/λ − 0.25 ∈ [−0.58, 0.08], so sup ≈ 0.08a and inf ≈ −0.55a
        let small = harnack_dichotomy_check(&pts, 0.1, k, alpha, r).unwrap();
        assert_eq!(small.branch, Branch::Upper);
        assert!(small.both_hold);
        // ball radius 0.45: x/λ spans ±3, both extremes ±a are attained
        let large = harnack_dichotomy_check(&pts, 0.9, k, alpha, r).unwrap();
        assert_eq!(large.branch, Branch::Neither);
        assert_eq!(large.witnesses.len(), 2);
    }

    #[test]
    fn flat_boundary_both_hold() {
        let out = harnack_dichotomy_check(&graph(|_| 0.0, 1.0), 0.5, 3, 0.2, 1.0).unwrap();
        assert_eq!(out.branch, Branch::Upper);
        assert!(out.both_hold);
    }

    #[test]
    fn hypothesis_violation_names_scale() {
        let err = harnack_dichotomy_check(&graph(|x| 0.8 * x.abs(), 1.0), 0.5, 4, 0.25, 1.0).unwrap_err();
        assert!(matches!(err, Error::Precondition { scale: 3, .. }), "{err}");
    }
}
