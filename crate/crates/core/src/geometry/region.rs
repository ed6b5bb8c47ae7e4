use serde::{Deserialize, Serialize};

use super::profile::GraphProfile;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoolOp {
    Union,
    Intersection,
    /// First child minus the union of the others.
    Difference,
    /// Complement of the single child.
    Complement,
}

/// A measurable set E ⊂ ℝⁿ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum RegionSpec {
    /// E = {x · normal < offset}; `normal` is the outward unit normal.
    HalfSpace { normal: Vec<f64>, offset: f64 },
    /// E = B_radius(center) when `inside`, its complement otherwise.
    Ball {
        center: Vec<f64>,
        radius: f64,
        inside: bool,
    },
    /// E = {xⁿ < f(x')}.
    Subgraph { profile: GraphProfile, dim: usize },
    Boolean { op: BoolOp, children: Vec<RegionSpec> },
    /// E = {λ R x + shift : x ∈ base}.
    Similar {
        base: Box<RegionSpec>,
        rotation: Vec<Vec<f64>>,
        scale: f64,
        shift: Vec<f64>,
    },
}

/// Sign of χ_E − χ_{CE} along a ray t ↦ p + tω, t > 0: `start` holds just
/// after t = 0 and flips at each crossing.
#[derive(Debug, Clone, PartialEq)]
pub struct RayProfile {
    pub start: f64,
    pub crossings: Vec<f64>,
}

impl RayProfile {
    /// ∫_a^∞ t^{-1-s} σ(t) dt in closed form.
    pub fn weighted_tail(&self, a: f64, s: f64) -> f64 {
        let mut sign = self.start;
        let mut lo = a;
        let mut acc = 0.0;
        for &c in &self.crossings {
            if c > lo {
                acc += sign * (lo.powf(-s) - c.powf(-s)) / s;
                lo = c;
            }
            sign = -sign;
        }
        acc + sign * lo.powf(-s) / s
    }

    /// ∫_a^b t^{-1-s} σ(t) dt in closed form, 0 < a < b.
    pub fn weighted_window(&self, a: f64, b: f64, s: f64) -> f64 {
        let mut sign = self.start;
        let mut lo = a;
        let mut acc = 0.0;
        for &c in &self.crossings {
            if c >= b {
                break;
            }
            if c > lo {
                acc += sign * (lo.powf(-s) - c.powf(-s)) / s;
                lo = c;
            }
            sign = -sign;
        }
        acc + sign * (lo.powf(-s) - b.powf(-s)) / s
    }

    /// σ at parameter t.
    pub fn sign_at(&self, t: f64) -> f64 {
        let k = self.crossings.iter().take_while(|&&c| c < t).count();
        if k % 2 == 0 {
            self.start
        } else {
            -self.start
        }
    }
}

/// A boundary point with its outward unit normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySample {
    pub point: Vec<f64>,
    pub normal: Vec<f64>,
}

const ON_BOUNDARY_TOL: f64 = 1e-9;

impl RegionSpec {
    pub fn half_space(normal: Vec<f64>, offset: f64) -> Result<Self> {
        let r = Self::HalfSpace { normal, offset };
        r.validate()?;
        Ok(r)
    }

    /// {xⁿ < 0} in ℝⁿ.
    pub fn lower_half_space(n: usize) -> Self {
        let mut normal = vec![0.0; n];
        normal[n - 1] = 1.0;
        Self::HalfSpace {
            normal,
            offset: 0.0,
        }
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        Self::Ball {
            center,
            radius,
            inside: true,
        }
    }

    pub fn subgraph(profile: GraphProfile, dim: usize) -> Self {
        Self::Subgraph { profile, dim }
    }

    pub fn empty(n: usize) -> Self {
        Self::Boolean {
            op: BoolOp::Intersection,
            children: vec![
                Self::lower_half_space(n),
                Self::lower_half_space(n).complement(),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::HalfSpace { normal, .. } => {
                let nn: f64 = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
                if normal.is_empty() || (nn - 1.0).abs() > 1e-9 {
                    return Err(invalid("normal", "half-space normal must be a unit vector"));
                }
                Ok(())
            }
            Self::Ball { center, radius, .. } => {
                if center.is_empty() || !(*radius > 0.0) {
                    return Err(invalid("radius", "ball radius must be positive"));
                }
                Ok(())
            }
            Self::Subgraph { dim, .. } => {
                if *dim < 2 {
                    return Err(invalid("dim", "subgraphs need n >= 2"));
                }
                Ok(())
            }
            Self::Boolean { op, children } => {
                if children.is_empty() || (*op == BoolOp::Complement && children.len() != 1) {
                    return Err(invalid("children", "wrong number of children for boolean op"));
                }
                let d = children[0].dim();
                for c in children {
                    c.validate()?;
                    if c.dim() != d {
                        return Err(Error::Dimension {
                            expected: d,
                            got: c.dim(),
                        });
                    }
                }
                Ok(())
            }
            Self::Similar {
                base,
                rotation,
                scale,
                shift,
            } => {
                base.validate()?;
                let n = base.dim();
                if rotation.len() != n || rotation.iter().any(|r| r.len() != n) || shift.len() != n {
                    return Err(Error::Dimension {
                        expected: n,
                        got: rotation.len(),
                    });
                }
                for i in 0..n {
                    for j in 0..n {
                        let d: f64 = (0..n).map(|k| rotation[k][i] * rotation[k][j]).sum();
                        let e = if i == j { 1.0 } else { 0.0 };
                        if (d - e).abs() > 1e-9 {
                            return Err(invalid("rotation", "must be orthogonal"));
                        }
                    }
                }
                if !(*scale > 0.0) {
                    return Err(invalid("scale", "must be positive"));
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::HalfSpace { normal, .. } => normal.len(),
            Self::Ball { center, .. } => center.len(),
            Self::Subgraph { dim, .. } => *dim,
            Self::Boolean { children, .. } => children[0].dim(),
            Self::Similar { base, .. } => base.dim(),
        }
    }

    pub fn complement(&self) -> Self {
        match self {
            Self::HalfSpace { normal, offset } => Self::HalfSpace {
                normal: normal.iter().map(|v| -v).collect(),
                offset: -offset,
            },
            Self::Ball {
                center,
                radius,
                inside,
            } => Self::Ball {
                center: center.clone(),
                radius: *radius,
                inside: !inside,
            },
            Self::Boolean {
                op: BoolOp::Complement,
                children,
            } => children[0].clone(),
            other => Self::Boolean {
                op: BoolOp::Complement,
                children: vec![other.clone()],
            },
        }
    }

    /// λ·E.
    pub fn scaled(&self, lambda: f64) -> Self {
        self.transformed(identity_rows(self.dim()), lambda, vec![0.0; self.dim()])
    }

    /// {λ R x + shift : x ∈ E}.
    pub fn transformed(&self, rotation: Vec<Vec<f64>>, scale: f64, shift: Vec<f64>) -> Self {
        Self::Similar {
            base: Box::new(self.clone()),
            rotation,
            scale,
            shift,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Self::HalfSpace { normal, offset } => dot(normal, x) < *offset,
            Self::Ball {
                center,
                radius,
                inside,
            } => (dist(center, x) < *radius) == *inside,
            Self::Subgraph { profile, dim } => x[dim - 1] < profile.eval(&x[..dim - 1]),
            Self::Boolean { op, children } => {
                combine(*op, children.iter().map(|c| c.contains(x)))
            }
            Self::Similar { .. } => {
                let (base, y) = self.pull_point(x);
                base.contains(&y)
            }
        }
    }

    /// χ_E(x) − χ_{CE}(x).
    pub fn signed_indicator(&self, x: &[f64]) -> f64 {
        if self.contains(x) {
            1.0
        } else {
            -1.0
        }
    }

    fn pull_point(&self, x: &[f64]) -> (&RegionSpec, Vec<f64>) {
        match self {
            Self::Similar {
                base,
                rotation,
                scale,
                shift,
            } => {
                let n = x.len();
                let d: Vec<f64> = (0..n).map(|i| x[i] - shift[i]).collect();
                let y = (0..n)
                    .map(|j| (0..n).map(|i| rotation[i][j] * d[i]).sum::<f64>() / scale)
                    .collect();
                (base, y)
            }
            _ => (self, x.to_vec()),
        }
    }

    /// Distance-like residual of x from ∂E (zero on the boundary).
    pub fn boundary_residual(&self, x: &[f64]) -> f64 {
        match self {
            Self::HalfSpace { normal, offset } => (dot(normal, x) - offset).abs(),
            Self::Ball { center, radius, .. } => (dist(center, x) - radius).abs(),
            Self::Subgraph { profile, dim } => {
                let g = profile.gradient(&x[..dim - 1]);
                let q = (1.0 + dot(&g, &g)).sqrt();
                (x[dim - 1] - profile.eval(&x[..dim - 1])).abs() / q
            }
            Self::Boolean { children, .. } => {
                // on ∂E only if on some child boundary and the combined
                // indicator changes across it
                children
                    .iter()
                    .map(|c| c.boundary_residual(x))
                    .fold(f64::INFINITY, f64::min)
            }
            Self::Similar { scale, .. } => {
                let (base, y) = self.pull_point(x);
                base.boundary_residual(&y) * scale
            }
        }
    }

    /// Whether x lies on ∂E up to `tol`.
    pub fn on_boundary(&self, x: &[f64], tol: f64) -> bool {
        if self.boundary_residual(x) > tol {
            return false;
        }
        match self.outward_normal(x) {
            Some(nu) => {
                let h = 1e-7;
                let a: Vec<f64> = x.iter().zip(&nu).map(|(p, v)| p - h * v).collect();
                let b: Vec<f64> = x.iter().zip(&nu).map(|(p, v)| p + h * v).collect();
                self.contains(&a) && !self.contains(&b)
            }
            None => false,
        }
    }

    /// Outward unit normal at a boundary point (pointing from E into CE).
    pub fn outward_normal(&self, x: &[f64]) -> Option<Vec<f64>> {
        match self {
            Self::HalfSpace { normal, .. } => Some(normal.clone()),
            Self::Ball {
                center,
                inside,
                ..
            } => {
                let d: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
                let r = norm(&d);
                if r == 0.0 {
                    return None;
                }
                let sgn = if *inside { 1.0 } else { -1.0 };
                Some(d.iter().map(|v| sgn * v / r).collect())
            }
            Self::Subgraph { profile, dim } => {
                let g = profile.gradient(&x[..dim - 1]);
                let mut v: Vec<f64> = g.iter().map(|a| -a).collect();
                v.push(1.0);
                let q = norm(&v);
                Some(v.iter().map(|a| a / q).collect())
            }
            Self::Boolean { op, children } => {
                let (k, _) = children
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (i, c.boundary_residual(x)))
                    .min_by(|a, b| a.1.total_cmp(&b.1))?;
                let nu = children[k].outward_normal(x)?;
                let flip = match op {
                    BoolOp::Complement => true,
                    BoolOp::Difference => k > 0,
                    _ => false,
                };
                Some(if flip { nu.iter().map(|v| -v).collect() } else { nu })
            }
            Self::Similar { rotation, .. } => {
                let (base, y) = self.pull_point(x);
                let nu = base.outward_normal(&y)?;
                let n = nu.len();
                Some(
                    (0..n)
                        .map(|i| (0..n).map(|j| rotation[i][j] * nu[j]).sum())
                        .collect(),
                )
            }
        }
    }

    /// Sign profile of the ray p + tω, t > 0, truncated at `t_max`.
    ///
    /// When p is on a child boundary the starting sign is read from the
    /// direction relative to the outward normal.
    pub fn ray(&self, p: &[f64], omega: &[f64], t_max: f64) -> RayProfile {
        match self {
            Self::HalfSpace { normal, offset } => {
                let a = dot(normal, p) - offset;
                let b = dot(normal, omega);
                let on = a.abs() <= ON_BOUNDARY_TOL * (1.0 + p.iter().map(|v| v.abs()).fold(0.0, f64::max));
                if on {
                    let start = if b > 0.0 { -1.0 } else { 1.0 };
                    return RayProfile {
                        start,
                        crossings: vec![],
                    };
                }
                let start = if a < 0.0 { 1.0 } else { -1.0 };
                let mut crossings = vec![];
                if b != 0.0 {
                    let t = -a / b;
                    if t > 0.0 && t < t_max {
                        crossings.push(t);
                    }
                }
                RayProfile { start, crossings }
            }
            Self::Ball {
                center,
                radius,
                inside,
            } => {
                let d: Vec<f64> = p.iter().zip(center).map(|(a, c)| a - c).collect();
                let w2 = dot(omega, omega);
                let b = dot(&d, omega) / w2;
                let c = (dot(&d, &d) - radius * radius) / w2;
                let disc = b * b - c;
                let on = (dot(&d, &d).sqrt() - radius).abs() <= ON_BOUNDARY_TOL * radius;
                let sgn = if *inside { 1.0 } else { -1.0 };
                let mut crossings = vec![];
                let start;
                if on {
                    // roots 0 and -2b
                    let t = -2.0 * b;
                    if t > 0.0 {
                        start = sgn;
                        if t < t_max {
                            crossings.push(t);
                        }
                    } else {
                        start = -sgn;
                    }
                } else {
                    start = if c < 0.0 { sgn } else { -sgn };
                    if disc > 0.0 {
                        let sq = disc.sqrt();
                        // numerically stable roots of t² + 2bt + c
                        let q = -b - b.signum() * sq;
                        let (mut t1, mut t2) = if q != 0.0 { (q, c / q) } else { (-sq, sq) };
                        if t1 > t2 {
                            std::mem::swap(&mut t1, &mut t2);
                        }
                        for t in [t1, t2] {
                            if t > 0.0 && t < t_max {
                                crossings.push(t);
                            }
                        }
                    }
                }
                RayProfile { start, crossings }
            }
            Self::Subgraph { profile, dim } => subgraph_ray(profile, *dim, p, omega, t_max),
            Self::Boolean { op, children } => {
                let rays: Vec<RayProfile> = children.iter().map(|c| c.ray(p, omega, t_max)).collect();
                let mut state: Vec<bool> = rays.iter().map(|r| r.start > 0.0).collect();
                let mut events: Vec<(f64, usize)> = rays
                    .iter()
                    .enumerate()
                    .flat_map(|(i, r)| r.crossings.iter().map(move |&t| (t, i)))
                    .collect();
                events.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut cur = combine(*op, state.iter().copied());
                let start = if cur { 1.0 } else { -1.0 };
                let mut crossings = vec![];
                for (t, i) in events {
                    state[i] = !state[i];
                    let next = combine(*op, state.iter().copied());
                    if next != cur {
                        crossings.push(t);
                        cur = next;
                    }
                }
                // coincident crossings cancel
                let mut merged: Vec<f64> = Vec::with_capacity(crossings.len());
                for t in crossings {
                    if let Some(&last) = merged.last() {
                        if (t - last).abs() <= 1e-14 * t.max(1.0) {
                            merged.pop();
                            continue;
                        }
                    }
                    merged.push(t);
                }
                RayProfile {
                    start,
                    crossings: merged,
                }
            }
            Self::Similar {
                base,
                rotation,
                scale,
                ..
            } => {
                let (_, q) = self.pull_point(p);
                let n = omega.len();
                let w: Vec<f64> = (0..n)
                    .map(|j| (0..n).map(|i| rotation[i][j] * omega[i]).sum::<f64>() / scale)
                    .collect();
                base.ray(&q, &w, t_max)
            }
        }
    }

    /// Boundary points inside B_radius(center) with outward normals,
    /// spaced roughly `spacing` apart.
    pub fn boundary_samples(&self, center: &[f64], radius: f64, spacing: f64) -> Result<Vec<BoundarySample>> {
        let n = self.dim();
        if n > 3 {
            return Err(Error::UnsupportedDimension(n));
        }
        let mut out = Vec::new();
        match self {
            Self::HalfSpace { normal, offset } => {
                let foot: Vec<f64> = center
                    .iter()
                    .zip(normal)
                    .map(|(c, v)| c - (dot(normal, center) - offset) * v)
                    .collect();
                let basis = tangent_basis(normal);
                for coords in lattice(n - 1, radius, spacing) {
                    let mut p = foot.clone();
                    for (b, a) in basis.iter().zip(&coords) {
                        for i in 0..n {
                            p[i] += a * b[i];
                        }
                    }
                    if dist(&p, center) <= radius {
                        out.push(BoundarySample {
                            point: p,
                            normal: normal.clone(),
                        });
                    }
                }
            }
            Self::Ball {
                center: c,
                radius: r,
                ..
            } => {
                for u in sphere_points(n, (2.0 * std::f64::consts::PI * r / spacing).ceil().max(8.0) as usize) {
                    let p: Vec<f64> = c.iter().zip(&u).map(|(a, b)| a + r * b).collect();
                    if dist(&p, center) <= radius {
                        let normal = self.outward_normal(&p).unwrap();
                        out.push(BoundarySample { point: p, normal });
                    }
                }
            }
            Self::Subgraph { profile, dim } => {
                let base: Vec<f64> = center[..dim - 1].to_vec();
                for coords in lattice(dim - 1, radius, spacing) {
                    let xp: Vec<f64> = base.iter().zip(&coords).map(|(a, b)| a + b).collect();
                    let mut p = xp.clone();
                    p.push(profile.eval(&xp));
                    if dist(&p, center) <= radius {
                        let normal = self.outward_normal(&p).unwrap();
                        out.push(BoundarySample { point: p, normal });
                    }
                }
            }
            Self::Boolean { children, .. } => {
                for c in children {
                    for smp in c.boundary_samples(center, radius, spacing)? {
                        if self.on_boundary(&smp.point, 1e-9) {
                            let normal = self.outward_normal(&smp.point).unwrap();
                            out.push(BoundarySample {
                                point: smp.point,
                                normal,
                            });
                        }
                    }
                }
            }
            Self::Similar {
                base,
                rotation,
                scale,
                shift,
            } => {
                let (_, c) = self.pull_point(center);
                for smp in base.boundary_samples(&c, radius / scale, spacing / scale)? {
                    let p: Vec<f64> = (0..n)
                        .map(|i| {
                            shift[i] + scale * (0..n).map(|j| rotation[i][j] * smp.point[j]).sum::<f64>()
                        })
                        .collect();
                    let nu: Vec<f64> = (0..n)
                        .map(|i| (0..n).map(|j| rotation[i][j] * smp.normal[j]).sum())
                        .collect();
                    out.push(BoundarySample { point: p, normal: nu });
                }
            }
        }
        Ok(out)
    }
}

fn combine(op: BoolOp, mut it: impl Iterator<Item = bool>) -> bool {
    match op {
        BoolOp::Union => it.any(|b| b),
        BoolOp::Intersection => it.all(|b| b),
        BoolOp::Complement => !it.next().unwrap_or(false),
        BoolOp::Difference => {
            let first = it.next().unwrap_or(false);
            first && !it.any(|b| b)
        }
    }
}

/// Sign changes of xⁿ − f(x') along the ray, found by sampling then
/// bisection. Beyond the window where |xⁿ| ≤ sup|f| the sign is fixed.
fn subgraph_ray(profile: &GraphProfile, dim: usize, p: &[f64], omega: &[f64], t_max: f64) -> RayProfile {
    let g = |t: f64| {
        let xp: Vec<f64> = (0..dim - 1).map(|i| p[i] + t * omega[i]).collect();
        p[dim - 1] + t * omega[dim - 1] - profile.eval(&xp)
    };
    let g0 = g(0.0);
    let grad = profile.gradient(&p[..dim - 1]);
    let slope = omega[dim - 1] - dot(&grad, &omega[..dim - 1]);
    let on = g0.abs() <= ON_BOUNDARY_TOL * (1.0 + p[dim - 1].abs());
    let start = if on {
        if slope > 0.0 {
            -1.0
        } else {
            1.0
        }
    } else if g0 < 0.0 {
        1.0
    } else {
        -1.0
    };
    // window of possible crossings
    let mut t_end = t_max;
    if let Some(sup) = profile.sup_bound() {
        if omega[dim - 1] != 0.0 {
            let lim = ((sup + p[dim - 1].abs()) / omega[dim - 1].abs()) * 1.000001 + 1e-12;
            t_end = t_end.min(lim);
        }
    }
    let wlen = norm(&omega[..dim - 1]).max(1e-300);
    let step = (profile.length_scale().min(1.0) / 16.0) / wlen;
    // geometric start near 0, then uniform
    let mut ts: Vec<f64> = Vec::new();
    let t_geo = step.min(t_end);
    let mut t = t_geo * 1e-9;
    while t < t_geo {
        ts.push(t);
        t *= 2.0;
    }
    let mut t = t_geo;
    while t < t_end {
        ts.push(t);
        t += step;
        if ts.len() > 4_000_000 {
            break;
        }
    }
    ts.push(t_end);
    let mut crossings = Vec::new();
    let mut prev_t = 0.0;
    let mut prev_in = start > 0.0;
    for &tk in &ts {
        let gk = g(tk);
        let inside = gk < 0.0;
        if inside != prev_in {
            let (mut lo, mut hi) = (prev_t, tk);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if (g(mid) < 0.0) == prev_in {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            crossings.push(0.5 * (lo + hi));
            prev_in = inside;
        }
        prev_t = tk;
    }
    RayProfile { start, crossings }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub(crate) fn identity_rows(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// Orthonormal basis of ν^⊥ (Gram–Schmidt against the coordinate axes).
pub(crate) fn tangent_basis(nu: &[f64]) -> Vec<Vec<f64>> {
    let n = nu.len();
    let mut basis: Vec<Vec<f64>> = vec![nu.to_vec()];
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        for b in &basis {
            let d = dot(&e, b);
            for i in 0..n {
                e[i] -= d * b[i];
            }
        }
        let l = norm(&e);
        if l > 1e-8 {
            basis.push(e.iter().map(|v| v / l).collect());
        }
        if basis.len() == n {
            break;
        }
    }
    basis.remove(0);
    basis
}

fn lattice(d: usize, radius: f64, spacing: f64) -> Vec<Vec<f64>> {
    if d == 0 {
        return vec![vec![]];
    }
    let m = (radius / spacing).floor() as i64;
    let one: Vec<f64> = (-m..=m).map(|i| i as f64 * spacing).collect();
    let mut out: Vec<Vec<f64>> = vec![vec![]];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|v| {
                one.iter().map(move |&a| {
                    let mut w = v.clone();
                    w.push(a);
                    w
                })
            })
            .collect();
    }
    out
}

/// Roughly `m` points per great circle on S^{n-1}.
fn sphere_points(n: usize, m: usize) -> Vec<Vec<f64>> {
    use std::f64::consts::PI;
    match n {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..m)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / m as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let rings = (m / 2).max(2);
            let mut out = vec![];
            for i in 0..=rings {
                let th = PI * i as f64 / rings as f64;
                let k = ((m as f64 * th.sin()).round() as usize).max(1);
                for j in 0..k {
                    let ph = 2.0 * PI * j as f64 / k as f64;
                    out.push(vec![th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]);
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_ray_from_boundary_has_chord_crossing() {
        let b = RegionSpec::ball(vec![0.0, 0.0], 1.0);
        let p = [1.0, 0.0];
        let th: f64 = 0.3;
        let w = [-th.cos(), th.sin()];
        let r = b.ray(&p, &w, f64::INFINITY);
        assert_eq!(r.start, 1.0);
        assert_eq!(r.crossings.len(), 1);
        assert!((r.crossings[0] - 2.0 * th.cos()).abs() < 1e-14);
    }

    #[test]
    fn boolean_union_of_disjoint_balls() {
        let u = RegionSpec::Boolean {
            op: BoolOp::Union,
            children: vec![
                RegionSpec::ball(vec![0.0, 0.0], 1.0),
                RegionSpec::ball(vec![4.0, 0.0], 1.0),
            ],
        };
        let r = u.ray(&[-2.0, 0.0], &[1.0, 0.0], f64::INFINITY);
        assert_eq!(r.start, -1.0);
        assert_eq!(r.crossings.len(), 4);
        assert!((r.crossings[3] - 7.0).abs() < 1e-12);
        assert!(u.contains(&[4.5, 0.0]));
        assert!(!u.contains(&[2.0, 0.0]));
    }

    #[test]
    fn subgraph_ray_finds_sine_crossings() {
        let f = GraphProfile::sine_1d(0.5, 1.0, 0.0);
        let e = RegionSpec::subgraph(f, 2);
        let r = e.ray(&[0.0, 0.1], &[1.0, 0.0], 10.0);
        // zeros of 0.1 - 0.5 sin t on (0, 10)
        let a = (0.2f64).asin();
        let expect = [a, std::f64::consts::PI - a, 2.0 * std::f64::consts::PI + a, 3.0 * std::f64::consts::PI - a];
        assert_eq!(r.crossings.len(), 4);
        for (c, e) in r.crossings.iter().zip(expect) {
            assert!((c - e).abs() < 1e-10);
        }
    }

    #[test]
    fn weighted_tail_matches_piecewise_integral() {
        let r = RayProfile {
            start: 1.0,
            crossings: vec![0.5, 2.0],
        };
        let s = 0.5;
        // ∫_{0.1}^{0.5} - ∫_{0.5}^{2} + ∫_2^∞ of t^{-1.5}
        let f = |a: f64, b: f64| (a.powf(-s) - b.powf(-s)) / s;
        let expect = f(0.1, 0.5) - f(0.5, 2.0) + 2f64.powf(-s) / s;
        assert!((r.weighted_tail(0.1, s) - expect).abs() < 1e-14);
        assert!((r.weighted_window(0.1, 1.0, s) - (f(0.1, 0.5) - f(0.5, 1.0))).abs() < 1e-14);
    }

    #[test]
    fn complement_flips_indicator_and_normal() {
        let b = RegionSpec::ball(vec![0.0, 0.0, 0.0], 2.0);
        let c = b.complement();
        let x = [0.5, 0.2, -0.1];
        assert_eq!(b.signed_indicator(&x), -c.signed_indicator(&x));
        let p = [2.0, 0.0, 0.0];
        assert_eq!(c.outward_normal(&p).unwrap(), vec![-1.0, 0.0, 0.0]);
    }

    #[test]
    fn similar_region_maps_points() {
        let b = RegionSpec::ball(vec![1.0, 0.0], 1.0);
        let s = b.scaled(2.0);
        assert!(s.contains(&[3.9, 0.0]));
        assert!(!s.contains(&[4.1, 0.0]));
        assert!(s.on_boundary(&[4.0, 0.0], 1e-12));
    }
}
