//! NMC of a subgraph {x₂ < f(x₁)} ⊂ ℝ² with a Euclidean (or scalar) kernel.
//!
//! Integrating the vertical variable out of (χ_E − χ_{CE})|x − y|^{-2-s}
//! leaves a one-dimensional principal value
//!
//!   H(y) = 2C ∫_0^∞ ρ^{-1-s} [Φ(q(ρ)) + Φ(q(−ρ))] dρ,   q(±ρ) = (f(y₁ ± ρ) − f(y₁))/ρ,
//!
//! with Φ(q) = ∫_0^{atan q} cos^{s}φ dφ, odd and bounded by Φ(∞) = ½B(½, (1+s)/2).

use statrs::function::beta::{beta, beta_reg};

use super::PvSettings;
use crate::error::{invalid, Result};
use crate::geometry::GraphProfile;
use crate::quad::gl;

const TABLE_THETA: f64 = 1.4;
const TABLE_CELLS: usize = 1434;

/// Φ_a(q) = ∫_0^{atan q} cos^a φ dφ, tabulated in θ = atan|q| with cubic
/// Hermite interpolation below θ = 1.4 and the incomplete beta function above.
#[derive(Debug, Clone)]
pub(crate) struct PhiTable {
    a: f64,
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
    half_beta: f64,
}

impl PhiTable {
    pub(crate) fn new(a: f64) -> Self {
        let step = TABLE_THETA / TABLE_CELLS as f64;
        let rule = gl(10);
        let mut values = Vec::with_capacity(TABLE_CELLS + 1);
        let mut acc = 0.0;
        values.push(0.0);
        for k in 0..TABLE_CELLS {
            let lo = k as f64 * step;
            acc += rule.integrate(lo, lo + step, |t| t.cos().powf(a));
            values.push(acc);
        }
        let slopes = (0..=TABLE_CELLS).map(|k| (k as f64 * step).cos().powf(a) * step).collect();
        Self {
            a,
            step,
            values,
            slopes,
            half_beta: 0.5 * beta(0.5, (a + 1.0) / 2.0),
        }
    }

    pub(crate) fn eval(&self, q: f64) -> f64 {
        if q == 0.0 {
            return 0.0;
        }
        let th = q.abs().atan();
        let v = if th < TABLE_THETA {
            let u = th / self.step;
            let k = (u as usize).min(TABLE_CELLS - 1);
            let t = u - k as f64;
            let t2 = t * t;
            let t3 = t2 * t;
            (2.0 * t3 - 3.0 * t2 + 1.0) * self.values[k]
                + (t3 - 2.0 * t2 + t) * self.slopes[k]
                + (-2.0 * t3 + 3.0 * t2) * self.values[k + 1]
                + (t3 - t2) * self.slopes[k + 1]
        } else {
            let x = th.sin().powi(2);
            self.half_beta * beta_reg(0.5, (self.a + 1.0) / 2.0, x)
        };
        v.copysign(q)
    }

    /// Φ'(q) = (1 + q²)^{-(a+2)/2}.
    pub(crate) fn derivative(&self, q: f64) -> f64 {
        (1.0 + q * q).powf(-(self.a + 2.0) / 2.0)
    }

    /// sup|Φ''| and sup|Φ'''| (the latter a coarse bound).
    fn higher_bounds(&self) -> (f64, f64) {
        let a = self.a;
        let q2 = 1.0 / (a + 3.0);
        let m2 = (a + 2.0) * q2.sqrt() * (1.0 + q2).powf(-(a + 4.0) / 2.0);
        (m2, (a + 2.0) * (a + 3.0))
    }
}

/// Pieces of one graph-formula evaluation; every entry already carries the
/// prefactor.
#[derive(Debug, Clone)]
pub(crate) struct GraphParts {
    /// (δ_j, ∫_{δ_{j+1}}^{δ_j}) for δ_j = r·2^{-j}.
    pub shells: Vec<(f64, f64)>,
    /// ∫_0^{δ_J} from the second-order model Φ'(f')f''ρ.
    pub inner_model: f64,
    /// ∫_r^{R} by quadrature.
    pub middle: f64,
    /// Linearized far field beyond R.
    pub far: f64,
    /// Bound on the error of the linearization and the moment truncation.
    pub far_bound: f64,
}

/// Evaluator for one profile; reused across base points.
pub(crate) struct GraphNmc<'a> {
    pub profile: &'a GraphProfile,
    pub s: f64,
    /// 2C_{1+1,s}·c^{-s/2} for the kernel of c·Id.
    pub prefactor: f64,
    pub phi: PhiTable,
    slope: f64,
    bsup: f64,
    knots: Vec<f64>,
    panel: f64,
    /// Panel cap once both y ± ρ lie in the closed-form exterior.
    outer_panel: f64,
    settings: PvSettings,
}

impl<'a> GraphNmc<'a> {
    pub(crate) fn new(profile: &'a GraphProfile, s: f64, prefactor: f64, settings: PvSettings) -> Result<Self> {
        Self::with_table(profile, s, prefactor, settings, PhiTable::new(s))
    }

    pub(crate) fn with_table(
        profile: &'a GraphProfile,
        s: f64,
        prefactor: f64,
        settings: PvSettings,
        phi: PhiTable,
    ) -> Result<Self> {
        let (slope, bsup) = profile
            .affine_split()
            .ok_or_else(|| invalid("profile", "graph formula needs a bounded perturbation of a linear profile"))?;
        let mut knots = Vec::new();
        let ls = profile.length_scale();
        let mut outer = ls;
        if let GraphProfile::Gridded(g) = profile {
            knots = g.nodes();
            outer = g.exterior.length_scale();
        }
        Ok(Self {
            profile,
            s,
            prefactor,
            phi,
            slope,
            bsup,
            knots,
            panel: if ls.is_finite() { 0.5 * ls } else { f64::INFINITY },
            outer_panel: if outer.is_finite() { 0.5 * outer } else { f64::INFINITY },
            settings,
        })
    }

    fn integrand(&self, y: f64, fy: f64, rho: f64) -> f64 {
        let qp = (self.profile.eval1(y + rho) - fy) / rho;
        let qm = (self.profile.eval1(y - rho) - fy) / rho;
        rho.powf(-1.0 - self.s) * (self.phi.eval(qp) + self.phi.eval(qm))
    }

    /// GL over [a, b] split at knot distances and at the panel cap.
    fn integrate(&self, y: f64, fy: f64, a: f64, b: f64) -> f64 {
        let mut cuts = vec![a, b];
        for &x in &self.knots {
            let d = (x - y).abs();
            if d > a && d < b {
                cuts.push(d);
            }
        }
        cuts.sort_by(f64::total_cmp);
        let outside = if self.knots.is_empty() { f64::INFINITY } else { 1.0 + y.abs() };
        let rule = gl(8);
        let mut acc = 0.0;
        for w in cuts.windows(2) {
            let len = w[1] - w[0];
            if len <= 0.0 {
                continue;
            }
            let panel = if w[0] >= outside { self.outer_panel } else { self.panel };
            let pieces = if panel.is_finite() {
                (len / panel).ceil().max(1.0) as usize
            } else {
                1
            };
            let h = len / pieces as f64;
            for k in 0..pieces {
                let lo = w[0] + k as f64 * h;
                acc += rule.integrate(lo, lo + h, |rho| self.integrand(y, fy, rho));
            }
        }
        acc
    }

    /// Smallest R beyond which both y ± ρ lie in the closed-form exterior
    /// and the linearization error is below `far_tol`.
    pub(crate) fn far_radius(&self, y: f64) -> f64 {
        let s = self.s;
        let b = self.bsup;
        let mut r_min = self.settings.radius.max(1.0);
        if !self.knots.is_empty() {
            r_min = r_min.max(1.0 + y.abs() + self.settings.radius);
        }
        if b == 0.0 {
            return r_min;
        }
        let (m2, m3) = self.phi.higher_bounds();
        let tol = self.settings.far_tolerance;
        let r = if self.slope == 0.0 {
            // 2 · (m3/6)(2B/ρ)³ integrated against ρ^{-1-s}
            let c = self.prefactor * m3 / 3.0 * 8.0 * b.powi(3) / (3.0 + s);
            (c / tol).powf(1.0 / (3.0 + s))
        } else {
            let c = self.prefactor * m2 * 4.0 * b * b / (2.0 + s);
            (c / tol).powf(1.0 / (2.0 + s))
        };
        r.max(r_min)
    }

    fn linearization_bound(&self, r: f64) -> f64 {
        let (s, b) = (self.s, self.bsup);
        let (m2, m3) = self.phi.higher_bounds();
        if self.slope == 0.0 {
            self.prefactor * m3 / 3.0 * 8.0 * b.powi(3) * r.powf(-3.0 - s) / (3.0 + s)
        } else {
            self.prefactor * m2 * 4.0 * b * b * r.powf(-2.0 - s) / (2.0 + s)
        }
    }

    /// (A, truncation bound) for A = ∫_R^∞ ρ^{-2-s}[b(y+ρ) + b(y−ρ)] dρ,
    /// b = f − m·x. Depends on the profile only through |x| ≥ R − |y|.
    pub(crate) fn far_moment(&self, y: f64, r: f64) -> (f64, f64) {
        let s = self.s;
        let b = self.bsup;
        if b == 0.0 {
            return (0.0, 0.0);
        }
        let tol = 0.1 * self.settings.far_tolerance;
        let lin = |x: f64| self.profile.eval1(x) - self.slope * x;
        let exterior = match self.profile {
            GraphProfile::Gridded(g) => g.exterior.as_ref(),
            p => p,
        };
        if exterior.length_scale().is_infinite() {
            // b is constant
            let v = 2.0 * exterior.eval1(0.0) * r.powf(-1.0 - s) / (1.0 + s);
            return (v, 0.0);
        }
        // truncate where the remaining mass drops below tol: 2B X^{-1-s}/(1+s)
        // in general, 4B X^{-2-s}/k after one integration by parts when b
        // is a sum of sines of frequency ≥ k
        let tail = |x: f64| match oscillation(exterior) {
            Some((amp, k)) => (4.0 * amp * x.powf(-2.0 - s) / k).min(2.0 * b * x.powf(-1.0 - s) / (1.0 + s)),
            None => 2.0 * b * x.powf(-1.0 - s) / (1.0 + s),
        };
        let r_far = match oscillation(exterior) {
            Some((amp, k)) => (4.0 * amp / (k * tol)).powf(1.0 / (2.0 + s)),
            None => (2.0 * b / ((1.0 + s) * tol)).powf(1.0 / (1.0 + s)),
        }
        .max(2.0 * r);
        let rule = gl(8);
        let mut acc = 0.0;
        let mut lo = r;
        let mut count = 0usize;
        while lo < r_far && count < 4_000_000 {
            let hi = (lo + self.outer_panel.min(0.5 * lo)).min(r_far);
            acc += rule.integrate(lo, hi, |rho| rho.powf(-2.0 - s) * (lin(y + rho) + lin(y - rho)));
            lo = hi;
            count += 1;
        }
        (acc, tail(lo))
    }

    /// Evaluates the pieces at y = (y, f(y)); `moment` may carry a cached
    /// far_moment for the same R.
    pub(crate) fn parts(&self, y: f64, moment: Option<(f64, f64, f64)>) -> GraphParts {
        let s = self.s;
        let fy = self.profile.eval1(y);
        let r = self.settings.radius;
        let (big_r, a, a_bound) = match moment {
            Some(m) => m,
            None => {
                let big_r = self.far_radius(y);
                let (a, ab) = self.far_moment(y, big_r);
                (big_r, a, ab)
            }
        };
        let dphi = self.phi.derivative(self.slope);
        let b_y = fy - self.slope * y;
        let far = self.prefactor * dphi * (a - 2.0 * b_y * big_r.powf(-1.0 - s) / (1.0 + s));
        let far_bound = self.prefactor * dphi * a_bound + self.linearization_bound(big_r);
        let middle = self.prefactor * self.integrate(y, fy, r, big_r);

        // Below rho_t the difference quotients lose precision; use the
        // second-order model there.
        let ls = self.profile.length_scale().min(r);
        let rho_t = 1e-3 * ls;
        let mut shells = Vec::new();
        let mut hi = r;
        let mut j = 0;
        while hi > rho_t && j < self.settings.max_level {
            let lo = 0.5 * hi;
            shells.push((hi, self.prefactor * self.integrate(y, fy, lo, hi)));
            hi = lo;
            j += 1;
        }
        let d1 = self.profile.gradient(&[y])[0];
        let d2 = second_derivative(self.profile, y);
        let inner_coef = self.prefactor * self.phi.derivative(d1) * d2;
        // continue the dyadic sequence with the model down to max_level
        while j < self.settings.max_level {
            let lo = 0.5 * hi;
            shells.push((hi, inner_coef * (hi.powf(1.0 - s) - lo.powf(1.0 - s)) / (1.0 - s)));
            hi = lo;
            j += 1;
        }
        GraphParts {
            shells,
            inner_model: inner_coef * hi.powf(1.0 - s) / (1.0 - s),
            middle,
            far,
            far_bound,
        }
    }
}

/// (Σ amplitudes, smallest frequency) when the profile is a sum of sines
/// and linear functions without offset.
fn oscillation(p: &GraphProfile) -> Option<(f64, f64)> {
    match p {
        GraphProfile::Sine { amplitude, wavevector, .. } => {
            let k = wavevector.iter().map(|v| v * v).sum::<f64>().sqrt();
            (k > 0.0).then_some((amplitude.abs(), k))
        }
        GraphProfile::Linear { offset, .. } if *offset == 0.0 => Some((0.0, f64::INFINITY)),
        GraphProfile::Sum { terms } => terms.iter().try_fold((0.0, f64::INFINITY), |(a, k), t| {
            let (ta, tk) = oscillation(t)?;
            Some((a + ta, k.min(tk)))
        }),
        GraphProfile::Dilated { base, factor } => {
            oscillation(base).map(|(a, k)| (a * factor.abs(), k / factor.abs()))
        }
        _ => None,
    }
}

fn second_derivative(profile: &GraphProfile, x: f64) -> f64 {
    match profile {
        GraphProfile::Gridded(g) => g.second_derivative(x),
        _ => {
            let h = 1e-4 * profile.length_scale().min(1.0);
            (profile.gradient(&[x + h])[0] - profile.gradient(&[x - h])[0]) / (2.0 * h)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_table_matches_incomplete_beta() {
        let t = PhiTable::new(0.5);
        for &q in &[1e-6f64, 0.01, 0.3, 1.0, 3.0, 5.0, 7.0, 100.0, -0.7] {
            let x = q.atan().sin().powi(2);
            let exact = (0.5 * beta(0.5, 0.75) * beta_reg(0.5, 0.75, x)).copysign(q);
            assert!((t.eval(q) - exact).abs() < 1e-13, "q = {q}");
        }
        let inf = t.eval(1e300);
        assert!((inf - 0.5 * beta(0.5, 0.75)).abs() < 1e-13);
    }
}
