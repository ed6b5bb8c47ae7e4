//! Dyadic cylinder analysis of boundary samples, the Harnack dichotomy and
//! the linear limit operator.

mod fit;
mod harnack;
mod limit;

use serde::{Deserialize, Serialize};

pub use fit::{fit_cylinder, CylinderFit};
pub(crate) use harnack::dichotomy;
pub use harnack::{harnack_dichotomy_check, Branch, DichotomyOutcome};
pub use limit::{frac_laplacian_graph, frac_laplacian_graph_with, growth_check, growth_check_on, Growth, LimitValue};

use crate::error::{invalid, Result};
use crate::geometry::dist;
use crate::quad::linear_fit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlatnessSettings {
    /// Radius of the l = 0 ball.
    pub radius: f64,
    /// A scale needs at least this many points per dimension.
    pub points_per_dim: usize,
    /// Widths below this multiple of the resolution are not fitted.
    pub resolution_factor: f64,
    /// Normal resolution of the sampled surface per scale l (the last entry
    /// repeats); `None` takes the mean sample spacing in each ball.
    pub resolution: Option<Vec<f64>>,
}

impl Default for FlatnessSettings {
    fn default() -> Self {
        Self {
            radius: 1.0,
            points_per_dim: 10,
            resolution_factor: 10.0,
            resolution: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleFit {
    pub l: usize,
    pub radius: f64,
    pub direction: Vec<f64>,
    pub width: f64,
    pub count: usize,
    /// Resolution used for the fit cutoff at this scale.
    pub resolution: f64,
    /// Whether the scale entered the exponent fit.
    pub fitted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatnessReport {
    pub scales: Vec<ScaleFit>,
    /// Scales dropped for lack of points.
    pub omitted: Vec<usize>,
    /// −(slope of log₂ w_l against l) − 1. +∞ (serialized as null) when
    /// every width vanishes, NaN when fewer than two scales are resolved.
    pub alpha_fit: f64,
    /// |ν_l − ν_{l+1}| for consecutive retained scales.
    pub normals_drift: Vec<f64>,
    /// C in the drift envelope C·2^{-l·alpha_fit}: four times the largest
    /// w_l 2^{l(1+alpha_fit)}/radius over fitted scales.
    pub drift_constant: f64,
    pub drift_within_envelope: bool,
    /// w_l ≤ radius·2^{-l(1+α)} at every retained scale, for the α given.
    pub within_alpha_cylinders: bool,
    pub alpha: f64,
}

impl FlatnessReport {
    /// l, radius, width, ν components, drift to the next scale.
    pub fn to_csv(&self) -> String {
        let n = self.scales.first().map_or(0, |s| s.direction.len());
        let mut out = String::from("l,radius,width");
        for i in 0..n {
            out.push_str(&format!(",nu_{i}"));
        }
        out.push_str(",drift\n");
        for (i, sc) in self.scales.iter().enumerate() {
            out.push_str(&format!("{},{:e},{:e}", sc.l, sc.radius, sc.width));
            for v in &sc.direction {
                out.push_str(&format!(",{v:e}"));
            }
            match self.normals_drift.get(i) {
                Some(d) => out.push_str(&format!(",{d:e}\n")),
                None => out.push_str(",\n"),
            }
        }
        out
    }
}

pub fn dyadic_flatness_report(points: &[Vec<f64>], base: &[f64], k_max: usize, alpha: f64) -> Result<FlatnessReport> {
    dyadic_flatness_report_with(points, base, k_max, alpha, &FlatnessSettings::default())
}

pub fn dyadic_flatness_report_with(
    points: &[Vec<f64>],
    base: &[f64],
    k_max: usize,
    alpha: f64,
    settings: &FlatnessSettings,
) -> Result<FlatnessReport> {
    if !(alpha > 0.0 && alpha < 1.0) || !(settings.radius > 0.0) {
        return Err(invalid("alpha", "need 0 < alpha < 1 and a positive radius"));
    }
    let n = base.len();
    let mut scales = Vec::new();
    let mut omitted = Vec::new();
    for l in 0..=k_max {
        let radius = settings.radius * 0.5f64.powi(l as i32);
        let count = points.iter().filter(|p| dist(p, base) <= radius).count();
        if count < settings.points_per_dim * n {
            log::warn!("scale {l}: {count} points in the ball, omitted");
            omitted.push(l);
            continue;
        }
        let fit = fit_cylinder(points, base, radius)?;
        let resolution = if let Some(r) = settings.resolution.as_ref().filter(|r| !r.is_empty()) {
            r[l.min(r.len() - 1)]
        } else if n > 1 {
            (2.0 * radius) / (count as f64).powf(1.0 / (n - 1) as f64)
        } else {
            2.0 * radius / count as f64
        };
        scales.push(ScaleFit {
            l,
            radius,
            direction: fit.direction,
            width: fit.width,
            count,
            resolution,
            fitted: fit.width > settings.resolution_factor * resolution,
        });
    }
    let used: Vec<&ScaleFit> = scales.iter().filter(|s| s.fitted).collect();
    let all_flat = scales.iter().all(|s| s.width <= 1e-12 * s.radius);
    let alpha_fit = if !scales.is_empty() && all_flat {
        f64::INFINITY
    } else if used.len() >= 2 {
        let xs: Vec<f64> = used.iter().map(|s| s.l as f64).collect();
        let ys: Vec<f64> = used.iter().map(|s| s.width.log2()).collect();
        -linear_fit(&xs, &ys).0 - 1.0
    } else {
        log::warn!("fewer than two resolved scales; no exponent fitted");
        f64::NAN
    };
    let normals_drift: Vec<f64> = scales
        .windows(2)
        .map(|w| dist(&w[0].direction, &w[1].direction))
        .collect();
    let drift_constant = 4.0
        * used
            .iter()
            .map(|s| s.width * 2f64.powf(s.l as f64 * (1.0 + alpha_fit)) / settings.radius)
            .fold(0.0, f64::max);
    let drift_within_envelope = if alpha_fit.is_infinite() {
        normals_drift.iter().all(|d| *d <= 1e-12)
    } else {
        alpha_fit.is_finite()
            && scales
                .windows(2)
                .zip(&normals_drift)
                .all(|(w, d)| *d <= drift_constant * 2f64.powf(-(w[0].l as f64) * alpha_fit))
    };
    let within_alpha_cylinders = scales
        .iter()
        .all(|s| s.width <= settings.radius * 0.5f64.powf(s.l as f64 * (1.0 + alpha)));
    Ok(FlatnessReport {
        scales,
        omitted,
        alpha_fit,
        normals_drift,
        drift_constant,
        drift_within_envelope,
        within_alpha_cylinders,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(f: impl Fn(f64) -> f64) -> Vec<Vec<f64>> {
        // graded sampling: 4096 points per dyadic annulus around 0
        let mut pts = vec![vec![0.0, f(0.0)]];
        for l in 0..12 {
            let (lo, hi) = (0.5f64.powi(l + 1), 0.5f64.powi(l));
            for i in 0..4096 {
                let x = lo + (hi - lo) * (i as f64 + 0.5) / 4096.0;
                pts.push(vec![x, f(x)]);
                pts.push(vec![-x, f(-x)]);
            }
        }
        pts
    }

    #[test]
    fn hyperplane_sentinel() {
        let r = dyadic_flatness_report(&graph(|_| 0.0), &[0.0, 0.0], 4, 0.25).unwrap();
        assert!(r.alpha_fit.is_infinite());
        assert!(r.scales.iter().all(|s| s.width == 0.0));
        assert!(r.drift_within_envelope && r.within_alpha_cylinders);
    }

    #[test]
    fn cusp_exponent() {
        // |x|^{1.5}: the slab over B_ρ has half-width ρ^{1.5}/2 up to O(ρ^{2.5})
        let r = dyadic_flatness_report(&graph(|x| x.abs().powf(1.5)), &[0.0, 0.0], 10, 0.25).unwrap();
        assert!((r.alpha_fit - 0.5).abs() < 0.05, "{}", r.alpha_fit);
        assert!(r.drift_within_envelope);
    }

    #[test]
    fn undersampled_scale_is_omitted() {
        let pts: Vec<Vec<f64>> = (0..=40).map(|i| vec![-1.0 + 0.05 * i as f64, 0.0]).collect();
        let r = dyadic_flatness_report(&pts, &[0.0, 0.0], 4, 0.25).unwrap();
        assert_eq!(r.omitted, vec![2, 3, 4]);
        assert!(r.to_csv().starts_with("l,radius,width,nu_0,nu_1,drift\n"));
    }
}
