//! Nonlocal mean curvature H_s(y) = p.v.∫ (χ_E − χ_{CE})(x) K(x,y) dV(x),
//! its viscosity-sense bounds, the frozen-coefficient reduction and the
//! fractional perimeter.

mod frozen;
pub(crate) mod graph;
mod perimeter;
mod rays;
mod viscosity;

use serde::{Deserialize, Serialize};

pub use frozen::{frozen_coefficient_nmc, FrozenNmc};
pub use perimeter::{fractional_perimeter, fractional_perimeter_with, PerimeterResult, PerimeterSettings};
pub use rays::nmc_unpaired;
pub use viscosity::{viscosity_bound_check, viscosity_bound_check_at, TestedPoint, ViscosityReport, ViscositySettings};

use crate::error::{invalid, Error, Result};
use crate::geometry::{GraphProfile, RegionSpec, SpdMatrix};
use crate::kernel::KernelModel;
use crate::special::cns;

/// Controls of the principal-value evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PvSettings {
    /// Radius r splitting near field (|x − y| < r) from tail.
    pub radius: f64,
    /// Convergence threshold on successive dyadic partial values.
    pub pv_tolerance: f64,
    /// Number of dyadic levels δ_j = r·2^{-j} recorded.
    pub max_level: usize,
    /// Error target of the linearized far field in the graph formula.
    pub far_tolerance: f64,
}

impl Default for PvSettings {
    fn default() -> Self {
        Self {
            radius: 1.0,
            pv_tolerance: 1e-6,
            max_level: 60,
            far_tolerance: 1e-8,
        }
    }
}

impl PvSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || !(self.pv_tolerance > 0.0) || !(self.far_tolerance > 0.0) {
            return Err(invalid("pv settings", "radius and tolerances must be positive"));
        }
        if self.max_level < 2 {
            return Err(invalid("max_level", "need at least two dyadic levels"));
        }
        Ok(())
    }
}

/// How the integral was organized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NmcRoute {
    /// Exact sign profiles along antipodal ray pairs.
    Rays,
    /// Vertical integration over a graph.
    Graph,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NMCResult {
    pub y: Vec<f64>,
    pub value: f64,
    /// Contribution of |x − y| < radius.
    pub near_field: f64,
    /// Contribution of |x − y| > radius.
    pub tail: f64,
    /// (δ_j, ∫ over |x − y| > δ_j).
    pub delta_sequence: Vec<(f64, f64)>,
    pub converged: bool,
    pub route: NmcRoute,
    pub diagnostics: Vec<String>,
}

impl NMCResult {
    fn finish(mut self, tol: f64) -> Self {
        let seq = &self.delta_sequence;
        let last = seq.len();
        self.converged = last >= 2 && (seq[last - 1].1 - seq[last - 2].1).abs() < tol && self.value.is_finite();
        if !self.converged {
            self.diagnostics.push(format!(
                "successive partial values differ by {:e} at δ = {:e}",
                if last >= 2 { (seq[last - 1].1 - seq[last - 2].1).abs() } else { f64::NAN },
                seq.last().map_or(f64::NAN, |p| p.0)
            ));
        }
        self
    }
}

/// H_s(y) with default settings.
pub fn nmc_pv(region: &RegionSpec, y: &[f64], model: &KernelModel) -> Result<NMCResult> {
    nmc_pv_with(region, y, model, &PvSettings::default())
}

/// Scalar c when g = c·Id.
fn scalar_of(g: &SpdMatrix) -> Option<f64> {
    let n = g.dim();
    let c = g.get(0, 0);
    let scalar = (0..n).all(|i| (0..n).all(|j| {
        let v = g.get(i, j);
        if i == j {
            (v - c).abs() <= 1e-14 * c
        } else {
            v == 0.0
        }
    }));
    scalar.then_some(c)
}

pub fn nmc_pv_with(region: &RegionSpec, y: &[f64], model: &KernelModel, settings: &PvSettings) -> Result<NMCResult> {
    settings.validate()?;
    region.validate()?;
    let n = region.dim();
    if y.len() != n {
        return Err(Error::Dimension { expected: n, got: y.len() });
    }
    if model.dim() != n {
        return Err(Error::Dimension {
            expected: n,
            got: model.dim(),
        });
    }
    let KernelModel::ConstantMetric { g, s } = model else {
        return Err(invalid(
            "model",
            "numeric kernels have no principal-value route; use frozen_coefficient_nmc",
        ));
    };
    let scale = 1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !region.on_boundary(y, 1e-8 * scale) {
        return Err(Error::NotOnBoundary(y.to_vec()));
    }
    if let RegionSpec::Subgraph { profile, dim: 2 } = region {
        if let (Some(c), Some(_)) = (scalar_of(g), profile.affine_split()) {
            let pref = 2.0 * cns(2, *s) * c.powf(-s / 2.0);
            return graph_route(profile, y, *s, pref, settings, None);
        }
    }
    rays::paired(region, y, g, *s, settings)
}

/// Graph route at y = (y₁, f(y₁)); `moment` optionally supplies a cached
/// (R, A, bound) for the far field.
pub(crate) fn graph_route(
    profile: &GraphProfile,
    y: &[f64],
    s: f64,
    prefactor: f64,
    settings: &PvSettings,
    moment: Option<(f64, f64, f64)>,
) -> Result<NMCResult> {
    let ev = graph::GraphNmc::new(profile, s, prefactor, *settings)?;
    let parts = ev.parts(y[0], moment);
    Ok(assemble_graph(y, &parts, settings))
}

pub(crate) fn assemble_graph(y: &[f64], parts: &graph::GraphParts, settings: &PvSettings) -> NMCResult {
    let tail = parts.middle + parts.far;
    let mut delta_sequence = Vec::with_capacity(parts.shells.len());
    let mut acc = tail;
    for &(hi, v) in &parts.shells {
        acc += v;
        delta_sequence.push((0.5 * hi, acc));
    }
    let near_field = acc - tail + parts.inner_model;
    let mut diagnostics = Vec::new();
    diagnostics.push(format!("far-field bound {:e}", parts.far_bound));
    NMCResult {
        y: y.to_vec(),
        value: near_field + tail,
        near_field,
        tail,
        delta_sequence,
        converged: false,
        route: NmcRoute::Graph,
        diagnostics,
    }
    .finish(settings.pv_tolerance)
}

#[cfg(test)]
mod tests {
    use super::*;

    const H1: f64 = -6.052_062_693_682_955;

    #[test]
    fn half_space_vanishes() {
        let m = KernelModel::euclidean(2, 0.5).unwrap();
        let r = nmc_pv(&RegionSpec::lower_half_space(2), &[0.3, 0.0], &m).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.converged);
    }

    #[test]
    fn unit_ball_value_and_complement() {
        let m = KernelModel::euclidean(2, 0.5).unwrap();
        let b = RegionSpec::ball(vec![0.0, 0.0], 1.0);
        let y = [0.6, 0.8];
        let r = nmc_pv(&b, &y, &m).unwrap();
        assert!((r.value - H1).abs() < 1e-9, "{}", r.value);
        assert!(r.converged);
        assert!((r.near_field + r.tail - r.value).abs() < 1e-12);
        let c = nmc_pv(&b.complement(), &y, &m).unwrap();
        assert!((c.value + r.value).abs() < 1e-12);
    }

    #[test]
    fn graph_route_flat_and_tilted() {
        let m = KernelModel::euclidean(2, 0.5).unwrap();
        let flat = RegionSpec::subgraph(GraphProfile::Constant { value: 0.2 }, 2);
        assert_eq!(nmc_pv(&flat, &[0.1, 0.2], &m).unwrap().value, 0.0);
        let tilt = RegionSpec::subgraph(GraphProfile::linear_1d(0.7, -0.1), 2);
        let r = nmc_pv(&tilt, &[0.5, 0.25], &m).unwrap();
        assert!(r.value.abs() < 1e-12, "{}", r.value);
    }

    #[test]
    fn graph_route_rational_bump() {
        // independent high-precision vertical quadrature of the same integral
        let m = KernelModel::euclidean(2, 0.5).unwrap();
        let p = GraphProfile::Rational { amplitude: 0.3 };
        let region = RegionSpec::subgraph(p.clone(), 2);
        let r = nmc_pv(&region, &[0.4, p.eval1(0.4)], &m).unwrap();
        assert!((r.value - 0.514_255_653_229_755).abs() < 1e-6, "{}", r.value);
        assert!(r.converged);
    }
}
