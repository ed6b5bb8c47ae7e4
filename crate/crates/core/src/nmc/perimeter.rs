//! Per_s(E; Ω) = ∫∫_{ℝⁿ×ℝⁿ ∖ CΩ×CΩ} |χ_E(x) − χ_E(y)| K(x,y) dV dV.
//!
//! By symmetry this is ∫_Ω dx ∫ |χ_E(x) − χ_E(y)| w(y) K dy with w = 1 on Ω
//! and 2 on CΩ. The inner integral is exact along rays from x; the outer
//! one uses composite Gauss–Legendre panels refined by doubling and
//! Richardson-extrapolated.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::geometry::{RayProfile, RegionSpec, SpdMatrix};
use crate::kernel::KernelModel;
use crate::quad::gl;
use crate::special::cns;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerimeterSettings {
    /// Panels per axis at level k are 2^k.
    pub min_level: usize,
    pub max_level: usize,
    /// Relative agreement of the last two extrapolated values.
    pub tolerance: f64,
}

impl Default for PerimeterSettings {
    fn default() -> Self {
        Self {
            min_level: 2,
            max_level: 12,
            tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerimeterResult {
    pub value: f64,
    /// (level, raw value, extrapolated value).
    pub levels: Vec<(usize, f64, f64)>,
    pub converged: bool,
}

pub fn fractional_perimeter(region: &RegionSpec, center: &[f64], radius: f64, model: &KernelModel) -> Result<f64> {
    let defaults = if region.dim() == 1 {
        PerimeterSettings::default()
    } else {
        PerimeterSettings {
            min_level: 1,
            max_level: 5,
            tolerance: 5e-3,
        }
    };
    Ok(fractional_perimeter_with(region, center, radius, model, &defaults)?.value)
}

/// ∫_0^∞ [σ(t) ≠ σ(0)] w(t) t^{-1-s} dt with w = 1 while inside Ω, 2 after.
fn ray_integral(e: &RayProfile, omega: &RayProfile, s: f64) -> f64 {
    let mut events: Vec<(f64, bool)> = e.crossings.iter().map(|&t| (t, true)).collect();
    events.extend(omega.crossings.iter().map(|&t| (t, false)));
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut inside = omega.start > 0.0;
    let mut differs = false;
    let mut prev = 0.0f64;
    let mut acc = 0.0;
    for (t, is_e) in events {
        if differs {
            let w = if inside { 1.0 } else { 2.0 };
            acc += w * (prev.powf(-s) - t.powf(-s)) / s;
        }
        if is_e {
            differs = !differs;
        } else {
            inside = !inside;
        }
        prev = t;
    }
    if differs {
        let w = if inside { 1.0 } else { 2.0 };
        acc += w * prev.powf(-s) / s;
    }
    acc
}

fn directions(n: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    match n {
        1 => Ok(vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)]),
        2 => {
            let rule = gl(8);
            let mut out = Vec::new();
            for k in 0..64 {
                let a = 2.0 * PI * k as f64 / 64.0;
                for (th, w) in rule.nodes_weights(a, a + PI / 32.0) {
                    out.push((vec![th.cos(), th.sin()], w));
                }
            }
            Ok(out)
        }
        _ => Err(Error::UnsupportedDimension(n)),
    }
}

fn inner(region: &RegionSpec, ball: &RegionSpec, x: &[f64], dirs: &[(Vec<f64>, f64)], g: &SpdMatrix, s: f64) -> f64 {
    let n = x.len() as f64;
    dirs.iter()
        .map(|(w, wt)| {
            let e = region.ray(x, w, 1e6);
            let o = ball.ray(x, w, f64::INFINITY);
            wt * g.norm(w).powf(-(n + s)) * ray_integral(&e, &o, s)
        })
        .sum()
}

pub fn fractional_perimeter_with(
    region: &RegionSpec,
    center: &[f64],
    radius: f64,
    model: &KernelModel,
    settings: &PerimeterSettings,
) -> Result<PerimeterResult> {
    region.validate()?;
    let n = region.dim();
    if center.len() != n || model.dim() != n {
        return Err(Error::Dimension { expected: n, got: center.len() });
    }
    if !(radius > 0.0) {
        return Err(invalid("radius", "Ω must be a ball of positive radius"));
    }
    if settings.max_level < settings.min_level + 2 {
        return Err(invalid("max_level", "need at least three refinement levels"));
    }
    let KernelModel::ConstantMetric { g, s } = model else {
        return Err(invalid("model", "fractional perimeter needs a constant-metric kernel"));
    };
    let s = *s;
    let ball = RegionSpec::ball(center.to_vec(), radius);
    let dirs = directions(n)?;
    let pref = cns(n, s) * g.sqrt_det() * g.sqrt_det();

    let level_value = |k: usize| -> f64 {
        let m = 1usize << k;
        match n {
            1 => {
                // panels aligned with the points of ∂E inside Ω
                let a = center[0] - radius;
                let b = center[0] + radius;
                let mut cuts = vec![a];
                for t in region.ray(&[a], &[1.0], 2.0 * radius).crossings {
                    if a + t < b {
                        cuts.push(a + t);
                    }
                }
                cuts.push(b);
                let rule = gl(8);
                let mut acc = 0.0;
                for w in cuts.windows(2) {
                    let h = (w[1] - w[0]) / m as f64;
                    for i in 0..m {
                        let lo = w[0] + i as f64 * h;
                        acc += rule.integrate(lo, lo + h, |x| inner(region, &ball, &[x], &dirs, g, s));
                    }
                }
                acc
            }
            _ => {
                let rule = gl(4);
                let hr = radius / m as f64;
                let hp = 2.0 * PI / (2 * m) as f64;
                let mut acc = 0.0;
                for i in 0..m {
                    for (rho, wr) in rule.nodes_weights(i as f64 * hr, (i + 1) as f64 * hr) {
                        for j in 0..2 * m {
                            for (ph, wp) in rule.nodes_weights(j as f64 * hp, (j + 1) as f64 * hp) {
                                let x = [center[0] + rho * ph.cos(), center[1] + rho * ph.sin()];
                                acc += wr * wp * rho * inner(region, &ball, &x, &dirs, g, s);
                            }
                        }
                    }
                }
                acc
            }
        }
    };

    // Richardson table with error exponents 1−s, 2−s, ...
    let mut raw: Vec<f64> = Vec::new();
    let mut levels = Vec::new();
    let mut table: Vec<Vec<f64>> = Vec::new();
    for k in settings.min_level..=settings.max_level {
        let v = pref * level_value(k);
        raw.push(v);
        let mut row = vec![v];
        if let Some(prev) = table.last() {
            for (j, p) in prev.iter().enumerate() {
                if j >= 2 {
                    break;
                }
                let q = 2f64.powf(j as f64 + 1.0 - s);
                let cur = row[j];
                row.push((q * cur - p) / (q - 1.0));
            }
        }
        let best = *row.last().unwrap();
        levels.push((k, v, best));
        table.push(row);
        let m = levels.len();
        if m >= 3 {
            let (a, b) = (levels[m - 2].2, levels[m - 1].2);
            if (a - b).abs() <= settings.tolerance * b.abs().max(1e-300) || (a == 0.0 && b == 0.0) {
                return Ok(PerimeterResult {
                    value: b,
                    levels,
                    converged: true,
                });
            }
        }
    }
    Err(Error::Refinement { trace: levels.iter().map(|l| l.2).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_line_in_unit_interval() {
        let s = 0.5;
        let m = KernelModel::euclidean(1, s).unwrap();
        let e = RegionSpec::lower_half_space(1);
        let r = fractional_perimeter_with(&e, &[0.0], 1.0, &m, &PerimeterSettings::default()).unwrap();
        // ∫_{-1}^0∫_0^∞ + ∫_{-∞}^{-1}∫_0^1 of (y−x)^{-1-s}, both orders
        let exact = cns(1, s) * 2f64.powf(2.0 - s) / (s * (1.0 - s));
        assert!((r.value - exact).abs() < 1e-6 * exact, "{} {} {:?}", r.value, exact, r.levels);
    }

    #[test]
    fn empty_set_and_complement() {
        let m = KernelModel::euclidean(1, 0.4).unwrap();
        assert_eq!(fractional_perimeter(&RegionSpec::empty(1), &[0.0], 1.0, &m).unwrap(), 0.0);
        let e = RegionSpec::half_space(vec![1.0], 0.3).unwrap();
        let a = fractional_perimeter(&e, &[0.0], 1.0, &m).unwrap();
        let b = fractional_perimeter(&e.complement(), &[0.0], 1.0, &m).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
    }
}
