//! s-minimal graphs over B'_1 = (−1, 1) ⊂ ℝ by explicit damped nonlocal
//! curvature flow ∂_t f = H_s[f].
//!
//! With the sign convention (χ_E − χ_{CE}) for E = {x₂ < f(x₁)}, H is
//! negative on concave bumps, so the flow that flattens them moves f along
//! +H. Linearized at a flat graph the operator is −P·A_{1+s}|ξ|^{1+s} with
//! P = 2C_{2,s}; the explicit step is capped at c·h^{1+s} accordingly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{GraphProfile, GriddedProfile, RegionSpec};
use crate::nmc::graph::{GraphNmc, PhiTable};
use crate::nmc::{assemble_graph, NMCResult, PvSettings};
use crate::special::{cns, cosine_symbol};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    /// Grid nodes on [−1, 1], endpoints included.
    pub nodes: usize,
    pub tol: f64,
    pub max_iters: usize,
    /// c in τ ≤ c·h^{1+s}; `None` uses half the linear stability limit.
    pub step_constant: Option<f64>,
    /// A step is rejected when the residual grows by more than this factor.
    pub backtrack: f64,
    /// Steps are halved at most this many times in a row.
    pub max_halvings: usize,
    pub pv: PvSettings,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            nodes: 63,
            tol: 1e-3,
            max_iters: 20_000,
            step_constant: None,
            backtrack: 1.05,
            max_halvings: 30,
            pv: PvSettings::default(),
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 5 {
            return Err(invalid("nodes", "need at least five grid nodes"));
        }
        if !(self.tol > 0.0) || !(self.backtrack >= 1.0) {
            return Err(invalid("tol", "need tol > 0 and backtrack >= 1"));
        }
        if let Some(c) = self.step_constant {
            if !(c > 0.0) {
                return Err(invalid("step_constant", "must be positive"));
            }
        }
        self.pv.validate()
    }
}

/// Half of the explicit stability limit 2/(P·A_{1+s}·π^{1+s}) of the
/// linearized operator at the Nyquist frequency π/h.
pub fn default_step_constant(s: f64) -> f64 {
    1.0 / (2.0 * cns(2, s) * cosine_symbol(1.0 + s) * std::f64::consts::PI.powf(1.0 + s))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphState {
    pub profile: GriddedProfile,
    pub s: f64,
    /// H_s at the nodes; zero at the two collar nodes.
    pub curvature: Vec<f64>,
    /// sup |H_s| over interior nodes.
    pub residual: f64,
    /// Every interior principal value converged.
    pub pv_converged: bool,
}

impl GraphState {
    pub fn exterior(&self) -> &GraphProfile {
        &self.profile.exterior
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.profile.nodes()
    }

    pub fn spacing(&self) -> f64 {
        self.profile.spacing()
    }

    pub fn region(&self) -> RegionSpec {
        RegionSpec::subgraph(GraphProfile::Gridded(self.profile.clone()), 2)
    }

    /// Interpolation error bound (5/384)h⁴ sup|f''''| of the spline over
    /// |x − center| ≤ radius, with h⁴f'''' estimated by fourth differences
    /// of the node values. Widths near it describe the interpolant, not the
    /// grid data.
    pub fn interpolation_resolution(&self, center: f64, radius: f64) -> f64 {
        let v = &self.profile.values;
        let x = self.nodes();
        let d4 = (2..v.len().saturating_sub(2))
            .filter(|&i| (x[i] - center).abs() <= radius)
            .map(|i| (v[i - 2] - 4.0 * v[i - 1] + 6.0 * v[i] - 4.0 * v[i + 1] + v[i + 2]).abs())
            .fold(0.0f64, f64::max);
        5.0 / 384.0 * d4
    }

    /// Boundary points (x, f(x)) graded toward `base`: `per_shell` points
    /// in each dyadic annulus 2^{-l-1} < |x − base| ≤ 2^{-l}, l < levels,
    /// and uniform with the same count on the rest of [−2, 2].
    pub fn boundary_points(&self, base: f64, levels: usize, per_shell: usize) -> Vec<Vec<f64>> {
        let f = |x: f64| vec![x, self.profile.eval(x)];
        let mut pts = vec![f(base)];
        for l in 0..levels {
            let (lo, hi) = (0.5f64.powi(l as i32 + 1), 0.5f64.powi(l as i32));
            for i in 0..per_shell {
                let d = lo + (hi - lo) * (i as f64 + 0.5) / per_shell as f64;
                pts.push(f(base + d));
                pts.push(f(base - d));
            }
        }
        for i in 0..per_shell {
            let d = 1.0 + (i as f64 + 0.5) / per_shell as f64;
            pts.push(f(base + d));
            pts.push(f(base - d));
        }
        pts
    }
}

/// Reusable pieces of the operator: the Φ table and the far moments,
/// which only see the closed-form exterior.
#[derive(Debug, Clone)]
pub struct GraphOperator {
    s: f64,
    prefactor: f64,
    phi: PhiTable,
    pv: PvSettings,
    /// (R, A, bound) per node.
    moments: Vec<(f64, f64, f64)>,
}

impl GraphOperator {
    pub fn new(profile: &GriddedProfile, s: f64, pv: PvSettings) -> Result<Self> {
        crate::geometry::check_s(s)?;
        pv.validate()?;
        let prefactor = 2.0 * cns(2, s);
        let phi = PhiTable::new(s);
        let whole = GraphProfile::Gridded(profile.clone());
        let ev = GraphNmc::with_table(&whole, s, prefactor, pv, phi.clone())?;
        let moments = profile
            .nodes()
            .par_iter()
            .map(|&y| {
                let r = ev.far_radius(y);
                let (a, b) = ev.far_moment(y, r);
                (r, a, b)
            })
            .collect();
        Ok(Self {
            s,
            prefactor,
            phi,
            pv,
            moments,
        })
    }

    /// H_s at node i of `profile` (same grid and exterior as at construction).
    pub fn at_node(&self, profile: &GriddedProfile, i: usize) -> Result<NMCResult> {
        let whole = GraphProfile::Gridded(profile.clone());
        let ev = GraphNmc::with_table(&whole, self.s, self.prefactor, self.pv, self.phi.clone())?;
        let y = profile.nodes()[i];
        let parts = ev.parts(y, Some(self.moments[i]));
        Ok(assemble_graph(&[y, profile.values[i]], &parts, &self.pv))
    }

    /// H_s at every interior node; collar nodes get 0.
    pub fn evaluate(&self, profile: &GriddedProfile) -> Result<(Vec<f64>, bool)> {
        let whole = GraphProfile::Gridded(profile.clone());
        let ev = GraphNmc::with_table(&whole, self.s, self.prefactor, self.pv, self.phi.clone())?;
        let nodes = profile.nodes();
        let m = nodes.len();
        let out: Vec<(f64, bool)> = (0..m)
            .into_par_iter()
            .map(|i| {
                if i == 0 || i + 1 == m {
                    return (0.0, true);
                }
                let parts = ev.parts(nodes[i], Some(self.moments[i]));
                let r = assemble_graph(&[nodes[i], profile.values[i]], &parts, &self.pv);
                (r.value, r.converged)
            })
            .collect();
        let ok = out.iter().all(|p| p.1 && p.0.is_finite());
        Ok((out.into_iter().map(|p| p.0).collect(), ok))
    }

    fn state(&self, profile: GriddedProfile) -> Result<GraphState> {
        let (curvature, pv_converged) = self.evaluate(&profile)?;
        let residual = curvature.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(GraphState {
            profile,
            s: self.s,
            curvature,
            residual,
            pv_converged,
        })
    }
}

/// Initial state: exterior data sampled at the nodes.
pub fn initial_state(exterior: &GraphProfile, s: f64, nodes: usize, op_pv: PvSettings) -> Result<(GraphState, GraphOperator)> {
    let values = exterior_values(exterior, nodes);
    let profile = GriddedProfile::new(values, exterior.clone())?;
    let op = GraphOperator::new(&profile, s, op_pv)?;
    let st = op.state(profile)?;
    Ok((st, op))
}

fn exterior_values(exterior: &GraphProfile, nodes: usize) -> Vec<f64> {
    let h = 2.0 / (nodes - 1) as f64;
    (0..nodes).map(|i| exterior.eval1(-1.0 + i as f64 * h)).collect()
}

/// NMC of the current graph at interior node i.
pub fn nmc_graph_operator(state: &GraphState, op: &GraphOperator, i: usize) -> Result<NMCResult> {
    let m = state.profile.values.len();
    if i == 0 || i + 1 >= m {
        return Err(invalid("node", "must be an interior node"));
    }
    let r = op.at_node(&state.profile, i)?;
    if !r.converged {
        return Err(Error::PvDivergence(r.diagnostics.join("; ")));
    }
    Ok(r)
}

/// f ← f + τH at interior nodes; the collar keeps the exterior data.
pub fn flow_step(state: &GraphState, op: &GraphOperator, tau: f64) -> Result<GraphState> {
    if !(tau > 0.0) {
        return Err(invalid("tau", "must be positive"));
    }
    let m = state.profile.values.len();
    let values: Vec<f64> = state
        .profile
        .values
        .iter()
        .zip(&state.curvature)
        .enumerate()
        .map(|(i, (f, h))| if i == 0 || i + 1 == m { *f } else { f + tau * h })
        .collect();
    op.state(state.profile.with_values(values))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub iteration: usize,
    pub tau: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub state: GraphState,
    pub converged: bool,
    pub iterations: usize,
    pub tau_cap: f64,
    /// Accepted steps, subsampled every 10 iterations plus the last.
    pub trace: Vec<FlowRecord>,
    pub rejected_steps: usize,
}

pub fn solve_minimal_graph(exterior: &GraphProfile, s: f64, tol: f64) -> Result<SolveOutcome> {
    solve_minimal_graph_with(
        exterior,
        s,
        &SolverSettings {
            tol,
            ..Default::default()
        },
    )
}

pub fn solve_minimal_graph_with(exterior: &GraphProfile, s: f64, settings: &SolverSettings) -> Result<SolveOutcome> {
    settings.validate()?;
    if exterior.affine_split().is_none() {
        return Err(invalid("exterior", "exterior data must be a bounded perturbation of a linear function"));
    }
    let (mut state, op) = initial_state(exterior, s, settings.nodes, settings.pv)?;
    let h = state.spacing();
    let c = settings.step_constant.unwrap_or_else(|| default_step_constant(s));
    let tau_cap = c * h.powf(1.0 + s);
    let mut tau = tau_cap;
    let mut trace = vec![FlowRecord {
        iteration: 0,
        tau: 0.0,
        residual: state.residual,
    }];
    let mut rejected = 0;
    let mut it = 0;
    while state.residual > settings.tol && it < settings.max_iters {
        let mut halvings = 0;
        let next = loop {
            let cand = flow_step(&state, &op, tau)?;
            if cand.residual <= settings.backtrack * state.residual && cand.residual.is_finite() {
                break cand;
            }
            rejected += 1;
            halvings += 1;
            tau *= 0.5;
            if halvings > settings.max_halvings {
                return Err(Error::Convergence(format!(
                    "step size underflow at iteration {it} (tau = {tau:e}); residual trace {:?}",
                    trace.iter().map(|r| r.residual).collect::<Vec<_>>()
                )));
            }
        };
        it += 1;
        state = next;
        if it % 10 == 0 || state.residual <= settings.tol {
            trace.push(FlowRecord {
                iteration: it,
                tau,
                residual: state.residual,
            });
        }
        // recover toward the cap after a rejection
        tau = (2.0 * tau).min(tau_cap);
    }
    let converged = state.residual <= settings.tol && state.pv_converged;
    if !converged {
        log::warn!("flow stopped after {it} iterations with residual {:e}", state.residual);
    }
    Ok(SolveOutcome {
        state,
        converged,
        iterations: it,
        tau_cap,
        trace,
        rejected_steps: rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_and_linear_are_fixed_points() {
        for ext in [GraphProfile::zero(), GraphProfile::linear_1d(0.3, -0.1)] {
            let (st, op) = initial_state(&ext, 0.5, 17, PvSettings::default()).unwrap();
            // roundoff of the difference quotients at the innermost shells
            assert!(st.residual < 1e-10, "{}", st.residual);
            let next = flow_step(&st, &op, 1e-3).unwrap();
            let moved = next
                .profile
                .values
                .iter()
                .zip(&st.profile.values)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(moved < 1e-14);
        }
    }

    #[test]
    fn small_cosine_matches_linearization() {
        // H[ε cos] ≈ −2C_{2,s} A_{1+s} ε cos x to first order in ε
        let (s, eps) = (0.5, 1e-3);
        let ext = GraphProfile::sine_1d(eps, 1.0, std::f64::consts::FRAC_PI_2);
        let (st, _) = initial_state(&ext, s, 65, PvSettings::default()).unwrap();
        let lin = -2.0 * cns(2, s) * cosine_symbol(1.0 + s);
        let nodes = st.nodes();
        for i in [8, 20, 32, 50] {
            let expect = lin * eps * nodes[i].cos();
            assert!((st.curvature[i] - expect).abs() < 1e-3 * eps, "{} {}", st.curvature[i], expect);
        }
    }
}
