//! Antipodal ray pairs. Along t ↦ y + tω the sign σ of χ_E − χ_{CE} is
//! piecewise constant, so ∫_δ^∞ σ t^{-1-s} dt is exact. For the pair
//! (ω, −ω) the δ^{-s} terms cancel whenever the starting signs are opposite,
//! which is the case at every boundary point for all non-tangent directions.

use std::f64::consts::PI;

use super::{NMCResult, NmcRoute, PvSettings};
use crate::error::{invalid, Error, Result};
use crate::geometry::{tangent_basis, RayProfile, RegionSpec, SpdMatrix};
use crate::quad::gl;
use crate::special::cns;

const SAMPLED_REACH: f64 = 1e3;

/// Σ over crossings c_i of −2σ_{i−1} c_i^{-s}/s restricted to c_i > δ, and σ(δ).
fn crossing_sum(p: &RayProfile, delta: f64, s: f64) -> (f64, f64) {
    let mut sign = p.start;
    let mut at = p.start;
    let mut acc = 0.0;
    for &c in &p.crossings {
        if c > delta {
            acc += -2.0 * sign * c.powf(-s) / s;
        } else {
            at = -sign;
        }
        sign = -sign;
    }
    (acc, at)
}

/// Gauss nodes (u, w, cap) on (u_min, π/2], dyadic toward u_min and refined
/// by bisection wherever `f` is rough (grazing rays make it jump).
fn planar_nodes(f: &dyn Fn(f64) -> f64, s: f64, u_min: f64, depth: usize) -> Vec<(f64, f64, f64)> {
    fn split(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: usize, out: &mut Vec<(f64, f64)>) {
        let m = 0.5 * (a + b);
        if depth == 0 {
            out.push((a, m));
            out.push((m, b));
            return;
        }
        let rule = gl(8);
        let l = rule.integrate(a, m, f);
        let r = rule.integrate(m, b, f);
        if (l + r - whole).abs() <= tol {
            out.push((a, m));
            out.push((m, b));
        } else {
            split(f, a, m, l, 0.5 * tol, depth - 1, out);
            split(f, m, b, r, 0.5 * tol, depth - 1, out);
        }
    }
    let mut panels = Vec::new();
    for k in 0..U_MIN_LEVEL {
        let b = PI / 2.0 * 0.5f64.powi(k);
        let a = 0.5 * b;
        let whole = if depth > 0 { gl(8).integrate(a, b, f) } else { 0.0 };
        split(f, a, b, whole, ANGULAR_TOL, depth, &mut panels);
    }
    let mut out: Vec<(f64, f64, f64)> = panels
        .iter()
        .flat_map(|&(a, b)| gl(8).nodes_weights(a, b).map(|(u, w)| (u, w, 0.0)))
        .collect();
    let (i, _) = out
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .expect("nonempty rule");
    let u = out[i].0;
    out[i].2 = u.powf(s) * u_min.powf(1.0 - s) / (1.0 - s);
    out
}

/// Absolute bisection tolerance per dyadic angular level (planar case).
const ANGULAR_TOL: f64 = 1e-10;
const MAX_DEPTH: usize = 40;

/// A quadrature direction. `cap` closes the graded angular grid: the
/// pair integrand near the tangent plane behaves like A·u^{-s} in the
/// angle u to the plane, A is read off at the innermost node and the
/// remaining cap (0, u_min) is integrated in closed form.
struct Direction {
    w: Vec<f64>,
    weight: f64,
    cap: f64,
}

/// Innermost graded angle; below ~1e-8 tangency is lost to rounding in the
/// ray intersections.
const U_MIN_LEVEL: i32 = 27;

/// Quadrature directions on the hemisphere {ω·ν < 0} with weights for dω,
/// graded toward the tangent plane where the integrand blows up like u^{-s}.
fn hemisphere(nu: &[f64], s: f64, planar: &dyn Fn(f64) -> f64, depth: usize) -> Result<Vec<Direction>> {
    let n = nu.len();
    let u_min = PI / 2.0 * 0.5f64.powi(U_MIN_LEVEL);
    // nodes u = π/2 − θ ∈ (u_min, π/2] with weights; the flag marks the innermost
    let graded = |order: usize| -> Vec<(f64, f64, f64)> {
        let rule = gl(order);
        let mut out = Vec::new();
        for k in 0..U_MIN_LEVEL {
            let b = PI / 2.0 * 0.5f64.powi(k);
            out.extend(rule.nodes_weights(0.5 * b, b).map(|(u, w)| (u, w, 0.0)));
        }
        let (i, _) = out
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
            .expect("nonempty rule");
        let u = out[i].0;
        out[i].2 = u.powf(s) * u_min.powf(1.0 - s) / (1.0 - s);
        out
    };
    match n {
        1 => Ok(vec![Direction {
            w: vec![-nu[0]],
            weight: 1.0,
            cap: 0.0,
        }]),
        2 => {
            let t = tangent_basis(nu);
            let mut out = Vec::new();
            for (u, weight, cap) in planar_nodes(planar, s, u_min, depth) {
                // θ = π/2 − u from the inward normal; sinθ = cos u
                let (su, cu) = u.sin_cos();
                for sg in [1.0, -1.0] {
                    out.push(Direction {
                        w: (0..2).map(|i| sg * cu * t[0][i] - su * nu[i]).collect(),
                        weight,
                        cap,
                    });
                }
            }
            Ok(out)
        }
        3 => {
            let t = tangent_basis(nu);
            let rule = gl(8);
            let mut phis = Vec::new();
            for k in 0..16 {
                let a = 2.0 * PI * k as f64 / 16.0;
                phis.extend(rule.nodes_weights(a, a + PI / 8.0));
            }
            let mut out = Vec::new();
            for (u, wt, cap) in graded(10) {
                let (cs, sn) = u.sin_cos();
                for &(ph, wp) in &phis {
                    let (sp, cp) = ph.sin_cos();
                    out.push(Direction {
                        w: (0..3).map(|i| sn * (cp * t[0][i] + sp * t[1][i]) - cs * nu[i]).collect(),
                        weight: wt * wp * sn,
                        cap: cap * wp,
                    });
                }
            }
            Ok(out)
        }
        _ => Err(Error::UnsupportedDimension(n)),
    }
}

fn reach(region: &RegionSpec, settings: &PvSettings) -> f64 {
    if contains_subgraph(region) {
        SAMPLED_REACH * settings.radius.max(1.0)
    } else {
        f64::INFINITY
    }
}

fn contains_subgraph(region: &RegionSpec) -> bool {
    match region {
        RegionSpec::Subgraph { .. } => true,
        RegionSpec::Boolean { children, .. } => children.iter().any(contains_subgraph),
        RegionSpec::Similar { base, .. } => contains_subgraph(base),
        _ => false,
    }
}

/// Paired-ray principal value for a constant metric g, against dV_g.
pub(crate) fn paired(region: &RegionSpec, y: &[f64], g: &SpdMatrix, s: f64, settings: &PvSettings) -> Result<NMCResult> {
    let n = y.len();
    let nu = region
        .outward_normal(y)
        .ok_or_else(|| Error::Geometry("no outward normal at the base point".into()))?;
    let t_max = reach(region, settings);
    let tb = tangent_basis(&nu);
    let planar = |u: f64| -> f64 {
        if n != 2 {
            return 0.0;
        }
        let (su, cu) = u.sin_cos();
        [1.0, -1.0]
            .iter()
            .map(|sg| {
                let w: Vec<f64> = (0..2).map(|i| sg * cu * tb[0][i] - su * nu[i]).collect();
                let minus: Vec<f64> = w.iter().map(|v| -v).collect();
                let a = region.ray(y, &w, t_max);
                let b = region.ray(y, &minus, t_max);
                g.norm(&w).powf(-(2.0 + s)) * (crossing_sum(&a, 0.0, s).0 + crossing_sum(&b, 0.0, s).0)
            })
            .sum()
    };
    // sampled crossings make the angular integrand noisy; bisection would not terminate usefully
    let depth = if contains_subgraph(region) { 0 } else { MAX_DEPTH };
    let dirs = hemisphere(&nu, s, &planar, depth)?;
    let c = cns(n, s) * g.sqrt_det();
    let r = settings.radius;
    let deltas: Vec<f64> = (1..=settings.max_level).map(|j| r * 0.5f64.powi(j as i32)).collect();

    let mut value = 0.0;
    let mut tail = 0.0;
    let mut partials = vec![0.0; deltas.len()];
    let mut uncancelled = 0.0;
    for d in &dirs {
        let w = &d.w;
        let minus: Vec<f64> = w.iter().map(|v| -v).collect();
        let a = region.ray(y, w, t_max);
        let b = region.ray(y, &minus, t_max);
        let wk = (d.weight + d.cap) * c * g.norm(w).powf(-(n as f64 + s));
        let (fa, _) = crossing_sum(&a, 0.0, s);
        let (fb, _) = crossing_sum(&b, 0.0, s);
        if a.start + b.start != 0.0 {
            uncancelled += wk;
        }
        value += wk * (fa + fb);
        tail += wk * (a.weighted_tail(r, s) + b.weighted_tail(r, s));
        for (p, &d) in partials.iter_mut().zip(&deltas) {
            let (sa, ta) = crossing_sum(&a, d, s);
            let (sb, tb) = crossing_sum(&b, d, s);
            *p += wk * ((ta + tb) * d.powf(-s) / s + sa + sb);
        }
    }
    let mut diagnostics = Vec::new();
    if uncancelled > 0.0 {
        diagnostics.push(format!(
            "starting signs do not cancel on directions of weight {uncancelled:e}; the principal value may not exist"
        ));
        value = f64::NAN;
    }
    Ok(NMCResult {
        y: y.to_vec(),
        value,
        near_field: value - tail,
        tail,
        delta_sequence: deltas.into_iter().zip(partials).collect(),
        converged: false,
        route: NmcRoute::Rays,
        diagnostics,
    }
    .finish(settings.pv_tolerance))
}

/// ∫_{|x−y|>δ} (χ_E − χ_{CE})K dx for the Euclidean kernel in ℝ² with a
/// midpoint rule over `directions` unpaired angles (offset by a fixed
/// irrational fraction of a cell) and exact radial integrals.
pub fn nmc_unpaired(region: &RegionSpec, y: &[f64], s: f64, directions: usize, delta: f64) -> Result<f64> {
    if region.dim() != 2 || y.len() != 2 {
        return Err(Error::UnsupportedDimension(region.dim()));
    }
    if directions == 0 || !(delta > 0.0) {
        return Err(invalid("directions", "need at least one direction and δ > 0"));
    }
    let t_max = if contains_subgraph(region) { SAMPLED_REACH } else { f64::INFINITY };
    let offset = 0.5 * (5f64.sqrt() - 1.0);
    let h = 2.0 * PI / directions as f64;
    let mut acc = 0.0;
    for k in 0..directions {
        let th = h * (k as f64 + offset);
        let w = [th.cos(), th.sin()];
        acc += region.ray(y, &w, t_max).weighted_tail(delta, s);
    }
    Ok(cns(2, s) * h * acc)
}
