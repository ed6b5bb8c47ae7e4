use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::geometry::{GraphProfile, MetricField, RegionSpec, SpdMatrix};
use crate::heat::SolvePlan;
use crate::kernel::{BudgetConstants, EstimateKind};
use crate::nmc::{PerimeterSettings, PvSettings};
use crate::solver::SolverSettings;
use crate::flatness::FlatnessSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    KernelCheck,
    HeatCheck,
    EstimateSweep,
    NmcEval,
    PerimeterEval,
    FlatnessPipeline,
    SolveAndVerify,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::KernelCheck => "kernel_check",
            Self::HeatCheck => "heat_check",
            Self::EstimateSweep => "estimate_sweep",
            Self::NmcEval => "nmc_eval",
            Self::PerimeterEval => "perimeter_eval",
            Self::FlatnessPipeline => "flatness_pipeline",
            Self::SolveAndVerify => "solve_and_verify",
        }
    }
}

fn config_err(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

fn unit_interval(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(config_err(field, format!("must lie in (0, 1), got {v}")))
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(field, format!("must be positive, got {v}")))
    }
}

fn non_empty<T>(field: &str, v: &[T]) -> Result<()> {
    if v.is_empty() {
        Err(config_err(field, "must not be empty"))
    } else {
        Ok(())
    }
}

fn radii(field: &str, rs: &[f64]) -> Result<()> {
    if rs.len() < 2 {
        return Err(config_err(field, "need at least two radii"));
    }
    for (i, &r) in rs.iter().enumerate() {
        positive(&format!("{field}[{i}]"), r)?;
    }
    Ok(())
}

/// Closed-form kernel against its time quadrature, and the tail integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelCheckParams {
    pub dims: Vec<usize>,
    pub s_values: Vec<f64>,
    /// Random pairs per (n, s).
    pub pairs: usize,
    /// Points are drawn from [−extent, extent]ⁿ.
    pub extent: f64,
    /// Draw a random constant metric per pair instead of the identity.
    pub random_metric: bool,
    pub tolerance: f64,
    pub tail_radii: Vec<f64>,
    /// Shell r < |x| < outer·r integrated numerically.
    pub tail_outer: f64,
    pub tail_tolerance: f64,
    pub slope_tolerance: f64,
}

impl Default for KernelCheckParams {
    fn default() -> Self {
        Self {
            dims: vec![1, 2],
            s_values: vec![0.3, 0.5, 0.7],
            pairs: 20,
            extent: 2.0,
            random_metric: true,
            tolerance: 1e-6,
            tail_radii: vec![1.0, 0.5, 0.25, 0.125],
            tail_outer: 1e8,
            tail_tolerance: 1e-4,
            slope_tolerance: 0.02,
        }
    }
}

impl KernelCheckParams {
    fn validate(&self) -> Result<()> {
        non_empty("params.dims", &self.dims)?;
        for (i, &n) in self.dims.iter().enumerate() {
            if !(1..=3).contains(&n) {
                return Err(config_err(format!("params.dims[{i}]"), "supported dimensions are 1 to 3"));
            }
        }
        non_empty("params.s_values", &self.s_values)?;
        for (i, &s) in self.s_values.iter().enumerate() {
            unit_interval(&format!("params.s_values[{i}]"), s)?;
        }
        if self.pairs == 0 {
            return Err(config_err("params.pairs", "must be at least 1"));
        }
        positive("params.extent", self.extent)?;
        positive("params.tolerance", self.tolerance)?;
        radii("params.tail_radii", &self.tail_radii)?;
        if !(self.tail_outer > 1.0) {
            return Err(config_err("params.tail_outer", "must exceed 1"));
        }
        positive("params.tail_tolerance", self.tail_tolerance)?;
        positive("params.slope_tolerance", self.slope_tolerance)
    }
}

/// Heat solver convergence, mass, symmetry, Duhamel route and Gaussian bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatCheckParams {
    pub t: f64,
    /// Grid steps for the convergence study (τ = h), successively halved.
    pub h_levels: Vec<f64>,
    /// Points where the error against the closed form is measured.
    pub probe_points: Vec<f64>,
    pub order_min: f64,
    pub mass_tolerance: f64,
    /// Variable metric for symmetry, Duhamel and envelope checks.
    pub metric: MetricField,
    pub symmetry_points: (Vec<f64>, Vec<f64>),
    pub symmetry_t: f64,
    pub symmetry_plan: SolvePlan,
    pub symmetry_tolerance: f64,
    pub duhamel_t: f64,
    pub duhamel_plan: SolvePlan,
    pub duhamel_tolerance: f64,
    /// Times of the Euclidean Gaussian fit, per dimension in `gauss_dims`.
    pub gauss_times: Vec<f64>,
    pub gauss_dims: Vec<usize>,
    pub gauss_plan: SolvePlan,
    pub gauss_tolerance: f64,
    /// Envelope H ≤ ratio·(4πt)^{-n/2}e^{−c d²/t} checked on `metric`.
    pub envelope: BudgetConstants,
}

impl Default for HeatCheckParams {
    fn default() -> Self {
        let plan = |h: f64| SolvePlan {
            h,
            tau: h,
            theta: 0.5,
            padding: 4.0,
        };
        Self {
            t: 0.25,
            h_levels: vec![1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0],
            probe_points: vec![0.0, 0.25, 0.5, 1.0],
            order_min: 1.8,
            mass_tolerance: 1e-10,
            metric: MetricField::sinusoidal_1d(0.4, 1.0, 0.3),
            symmetry_points: (vec![0.125], vec![0.375]),
            symmetry_t: 0.1,
            symmetry_plan: plan(1.0 / 128.0),
            symmetry_tolerance: 1e-6,
            duhamel_t: 0.1,
            duhamel_plan: SolvePlan {
                tau: 1.0 / 1024.0,
                ..plan(1.0 / 256.0)
            },
            duhamel_tolerance: 1e-3,
            gauss_times: vec![0.05, 0.1, 0.2],
            gauss_dims: vec![1, 2],
            gauss_plan: SolvePlan {
                padding: 2.0,
                ..plan(1.0 / 32.0)
            },
            gauss_tolerance: 0.05,
            envelope: BudgetConstants::default(),
        }
    }
}

impl HeatCheckParams {
    fn validate(&self) -> Result<()> {
        positive("params.t", self.t)?;
        if self.h_levels.len() < 2 {
            return Err(config_err("params.h_levels", "need at least two grid levels"));
        }
        for (i, &h) in self.h_levels.iter().enumerate() {
            positive(&format!("params.h_levels[{i}]"), h)?;
        }
        non_empty("params.probe_points", &self.probe_points)?;
        self.metric
            .validate()
            .map_err(|e| config_err("params.metric", e.to_string()))?;
        if self.metric.dim() != 1 {
            return Err(config_err("params.metric", "the heat check uses a one-dimensional metric"));
        }
        if self.symmetry_points.0.len() != 1 || self.symmetry_points.1.len() != 1 {
            return Err(config_err("params.symmetry_points", "expected two one-dimensional points"));
        }
        positive("params.symmetry_t", self.symmetry_t)?;
        positive("params.duhamel_t", self.duhamel_t)?;
        for (name, plan) in [
            ("params.symmetry_plan", &self.symmetry_plan),
            ("params.duhamel_plan", &self.duhamel_plan),
            ("params.gauss_plan", &self.gauss_plan),
        ] {
            plan.validate().map_err(|e| config_err(name, e.to_string()))?;
        }
        if self.gauss_times.len() < 2 {
            return Err(config_err("params.gauss_times", "need at least two times"));
        }
        non_empty("params.gauss_dims", &self.gauss_dims)?;
        for (i, &n) in self.gauss_dims.iter().enumerate() {
            if !(1..=2).contains(&n) {
                return Err(config_err(format!("params.gauss_dims[{i}]"), "supported dimensions are 1 and 2"));
            }
        }
        positive("params.gauss_tolerance", self.gauss_tolerance)
    }
}

/// r-sweep of one kernel estimate on the rescaled family g(x/r).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateSweepParams {
    pub estimate: EstimateKind,
    pub metric: MetricField,
    pub s: f64,
    pub radii: Vec<f64>,
    pub plan: SolvePlan,
    pub budget: BudgetConstants,
    pub slope_tolerance: f64,
    /// Times (in units of r²) of the Dirichlet gap series at r = 1, ρ = 1/2;
    /// only used by `dirichlet_gap`.
    pub gap_times: Vec<f64>,
    /// Lattice of the gap series; τ must stay well below the first time.
    pub gap_plan: SolvePlan,
    pub gap_r2_min: f64,
}

impl Default for EstimateSweepParams {
    fn default() -> Self {
        Self {
            estimate: EstimateKind::Effacement,
            metric: MetricField::sinusoidal_1d(0.4, 1.0, 0.3),
            s: 0.5,
            radii: vec![1.0, 0.5, 0.25, 0.125],
            plan: SolvePlan::default(),
            budget: BudgetConstants::default(),
            slope_tolerance: 0.15,
            gap_times: vec![0.01, 0.015, 0.02, 0.03, 0.05],
            gap_plan: SolvePlan {
                h: 1.0 / 128.0,
                tau: 1.0 / 1024.0,
                ..SolvePlan::default()
            },
            gap_r2_min: 0.95,
        }
    }
}

impl EstimateSweepParams {
    fn validate(&self) -> Result<()> {
        self.metric
            .validate()
            .map_err(|e| config_err("params.metric", e.to_string()))?;
        unit_interval("params.s", self.s)?;
        radii("params.radii", &self.radii)?;
        self.plan.validate().map_err(|e| config_err("params.plan", e.to_string()))?;
        positive("params.slope_tolerance", self.slope_tolerance)?;
        if self.estimate == EstimateKind::DirichletGap {
            if self.gap_times.len() < 2 {
                return Err(config_err("params.gap_times", "need at least two times"));
            }
            for (i, &t) in self.gap_times.iter().enumerate() {
                if !(t > 0.0 && t <= 1.0) {
                    return Err(config_err(format!("params.gap_times[{i}]"), "must lie in (0, 1]"));
                }
            }
            self.gap_plan
                .validate()
                .map_err(|e| config_err("params.gap_plan", e.to_string()))?;
        }
        Ok(())
    }
}

/// Principal value at one boundary point, with optional reference value,
/// unpaired comparison and scaling check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NmcEvalParams {
    pub region: RegionSpec,
    pub point: Vec<f64>,
    pub s: f64,
    /// Constant metric; identity when absent.
    pub metric: Option<SpdMatrix>,
    pub pv: PvSettings,
    pub expected: Option<f64>,
    pub tolerance: f64,
    /// Directions of the unpaired grid (0 skips it).
    pub unpaired_directions: usize,
    pub unpaired_delta: f64,
    pub unpaired_tolerance: f64,
    /// Dilations R with |H(RE, Ry) − R^{-s}H(E, y)| ≤ tolerance·R^{-s}.
    pub scalings: Vec<f64>,
    pub scaling_tolerance: f64,
}

impl Default for NmcEvalParams {
    fn default() -> Self {
        Self {
            region: RegionSpec::lower_half_space(2),
            point: vec![0.0, 0.0],
            s: 0.5,
            metric: None,
            pv: PvSettings::default(),
            expected: Some(0.0),
            tolerance: 1e-6,
            unpaired_directions: 0,
            unpaired_delta: 0.05,
            unpaired_tolerance: 1e-3,
            scalings: vec![],
            scaling_tolerance: 1e-3,
        }
    }
}

impl NmcEvalParams {
    fn validate(&self) -> Result<()> {
        self.region
            .validate()
            .map_err(|e| config_err("params.region", e.to_string()))?;
        if self.point.len() != self.region.dim() {
            return Err(config_err("params.point", "dimension differs from the region"));
        }
        if let Some(g) = &self.metric {
            if g.dim() != self.region.dim() {
                return Err(config_err("params.metric", "dimension differs from the region"));
            }
        }
        unit_interval("params.s", self.s)?;
        self.pv.validate().map_err(|e| config_err("params.pv", e.to_string()))?;
        positive("params.tolerance", self.tolerance)?;
        if self.unpaired_directions > 0 {
            positive("params.unpaired_delta", self.unpaired_delta)?;
        }
        for (i, &r) in self.scalings.iter().enumerate() {
            positive(&format!("params.scalings[{i}]"), r)?;
        }
        Ok(())
    }
}

/// Fractional perimeter of a region in a ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerimeterEvalParams {
    pub region: RegionSpec,
    pub center: Vec<f64>,
    pub radius: f64,
    pub s: f64,
    pub metric: Option<SpdMatrix>,
    pub settings: PerimeterSettings,
    pub expected: Option<f64>,
    /// Relative tolerance against `expected`.
    pub tolerance: f64,
}

impl Default for PerimeterEvalParams {
    fn default() -> Self {
        Self {
            region: RegionSpec::lower_half_space(1),
            center: vec![0.0],
            radius: 1.0,
            s: 0.5,
            metric: None,
            settings: PerimeterSettings::default(),
            expected: None,
            tolerance: 1e-6,
        }
    }
}

impl PerimeterEvalParams {
    fn validate(&self) -> Result<()> {
        self.region
            .validate()
            .map_err(|e| config_err("params.region", e.to_string()))?;
        if self.center.len() != self.region.dim() {
            return Err(config_err("params.center", "dimension differs from the region"));
        }
        positive("params.radius", self.radius)?;
        unit_interval("params.s", self.s)?;
        positive("params.tolerance", self.tolerance)
    }
}

/// Dyadic flatness of a sampled graph {(x, f(x))} around (base, f(base)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlatnessPipelineParams {
    pub profile: GraphProfile,
    pub base: f64,
    /// Dyadic shells of samples around the base point.
    pub levels: usize,
    pub per_shell: usize,
    /// Sample abscissae uniformly at random within each shell (seeded)
    /// instead of on a regular grid.
    pub jitter: bool,
    pub k_max: usize,
    pub alpha: f64,
    /// Required alpha_fit; defaults to `alpha`.
    pub min_alpha_fit: Option<f64>,
    pub settings: FlatnessSettings,
}

impl Default for FlatnessPipelineParams {
    fn default() -> Self {
        Self {
            profile: GraphProfile::Power {
                coefficient: 1.0,
                exponent: 1.5,
            },
            base: 0.0,
            levels: 14,
            per_shell: 256,
            jitter: true,
            k_max: 10,
            alpha: 0.25,
            min_alpha_fit: None,
            settings: FlatnessSettings::default(),
        }
    }
}

impl FlatnessPipelineParams {
    fn validate(&self) -> Result<()> {
        if !self.base.is_finite() {
            return Err(config_err("params.base", "must be finite"));
        }
        if self.per_shell == 0 {
            return Err(config_err("params.per_shell", "must be at least 1"));
        }
        unit_interval("params.alpha", self.alpha)?;
        positive("params.settings.radius", self.settings.radius)
    }
}

/// Minimal-graph solve followed by the regularity checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveAndVerifyParams {
    pub exterior: GraphProfile,
    pub s: f64,
    pub solver: SolverSettings,
    /// Run the viscosity, flatness and Harnack checks on the solution.
    pub verify: bool,
    pub viscosity_radius: f64,
    pub base: f64,
    pub levels: usize,
    pub per_shell: usize,
    pub k_max: usize,
    /// Defaults to s/2.
    pub alpha: Option<f64>,
    /// Required alpha_fit as a multiple of s.
    pub min_alpha_factor: f64,
    pub harnack: bool,
}

impl Default for SolveAndVerifyParams {
    fn default() -> Self {
        Self {
            exterior: GraphProfile::sine_1d(0.05, 2.0, 0.0),
            s: 0.5,
            solver: SolverSettings::default(),
            verify: true,
            viscosity_radius: 1.0,
            base: 0.0,
            levels: 10,
            per_shell: 4096,
            k_max: 4,
            alpha: None,
            min_alpha_factor: 0.5,
            harnack: true,
        }
    }
}

impl SolveAndVerifyParams {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(0.5 * self.s)
    }

    fn validate(&self) -> Result<()> {
        unit_interval("params.s", self.s)?;
        self.solver
            .validate()
            .map_err(|e| config_err("params.solver", e.to_string()))?;
        if self.exterior.affine_split().is_none() {
            return Err(config_err(
                "params.exterior",
                "must be a bounded perturbation of a linear function",
            ));
        }
        positive("params.viscosity_radius", self.viscosity_radius)?;
        if !(self.base.abs() < 0.5) {
            return Err(config_err("params.base", "must lie in (−1/2, 1/2)"));
        }
        if self.per_shell == 0 {
            return Err(config_err("params.per_shell", "must be at least 1"));
        }
        let a = self.alpha();
        if !(a > 0.0 && a < self.s) {
            return Err(config_err("params.alpha", format!("need 0 < alpha < s, got {a}")));
        }
        positive("params.min_alpha_factor", self.min_alpha_factor)
    }
}

/// Resolved parameters of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Params {
    KernelCheck(KernelCheckParams),
    HeatCheck(HeatCheckParams),
    EstimateSweep(EstimateSweepParams),
    NmcEval(NmcEvalParams),
    PerimeterEval(PerimeterEvalParams),
    FlatnessPipeline(FlatnessPipelineParams),
    SolveAndVerify(SolveAndVerifyParams),
}

impl Params {
    pub fn defaults(kind: ExperimentKind) -> Self {
        match kind {
            ExperimentKind::KernelCheck => Self::KernelCheck(Default::default()),
            ExperimentKind::HeatCheck => Self::HeatCheck(Default::default()),
            ExperimentKind::EstimateSweep => Self::EstimateSweep(Default::default()),
            ExperimentKind::NmcEval => Self::NmcEval(Default::default()),
            ExperimentKind::PerimeterEval => Self::PerimeterEval(Default::default()),
            ExperimentKind::FlatnessPipeline => Self::FlatnessPipeline(Default::default()),
            ExperimentKind::SolveAndVerify => Self::SolveAndVerify(Default::default()),
        }
    }

    pub fn kind(&self) -> ExperimentKind {
        match self {
            Self::KernelCheck(_) => ExperimentKind::KernelCheck,
            Self::HeatCheck(_) => ExperimentKind::HeatCheck,
            Self::EstimateSweep(_) => ExperimentKind::EstimateSweep,
            Self::NmcEval(_) => ExperimentKind::NmcEval,
            Self::PerimeterEval(_) => ExperimentKind::PerimeterEval,
            Self::FlatnessPipeline(_) => ExperimentKind::FlatnessPipeline,
            Self::SolveAndVerify(_) => ExperimentKind::SolveAndVerify,
        }
    }

    fn parse(kind: ExperimentKind, v: Value) -> Result<Self> {
        Ok(match kind {
            ExperimentKind::KernelCheck => Self::KernelCheck(typed(v, "params")?),
            ExperimentKind::HeatCheck => Self::HeatCheck(typed(v, "params")?),
            ExperimentKind::EstimateSweep => Self::EstimateSweep(typed(v, "params")?),
            ExperimentKind::NmcEval => Self::NmcEval(typed(v, "params")?),
            ExperimentKind::PerimeterEval => Self::PerimeterEval(typed(v, "params")?),
            ExperimentKind::FlatnessPipeline => Self::FlatnessPipeline(typed(v, "params")?),
            ExperimentKind::SolveAndVerify => Self::SolveAndVerify(typed(v, "params")?),
        })
    }

    fn validate(&self) -> Result<()> {
        match self {
            Self::KernelCheck(p) => p.validate(),
            Self::HeatCheck(p) => p.validate(),
            Self::EstimateSweep(p) => p.validate(),
            Self::NmcEval(p) => p.validate(),
            Self::PerimeterEval(p) => p.validate(),
            Self::FlatnessPipeline(p) => p.validate(),
            Self::SolveAndVerify(p) => p.validate(),
        }
    }
}

/// Deserializes `v`, reporting the path of the first offending field
/// below `prefix`.
pub(crate) fn typed<T: DeserializeOwned>(v: Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." || path.is_empty() {
            prefix.to_string()
        } else {
            format!("{prefix}.{path}")
        };
        config_err(field, e.into_inner().to_string())
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub params: Params,
    pub seed: u64,
    pub output: PathBuf,
}

impl ExperimentConfig {
    /// Default parameters of `kind`.
    pub fn new(kind: ExperimentKind, seed: u64, output: impl Into<PathBuf>) -> Self {
        Self {
            kind,
            params: Params::defaults(kind),
            seed,
            output: output.into(),
        }
    }

    pub fn from_params(params: Params, seed: u64, output: impl Into<PathBuf>) -> Self {
        Self {
            kind: params.kind(),
            params,
            seed,
            output: output.into(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| config_err("<root>", e.to_string()))?;
        Self::from_value(v)
    }

    /// Schema check: `kind`, `seed` and `output` are required, `params` is
    /// optional and completed with defaults; unknown keys are rejected.
    pub fn from_value(v: Value) -> Result<Self> {
        let Value::Object(mut map) = v else {
            return Err(config_err("<root>", "expected a JSON object"));
        };
        let kind: ExperimentKind = typed(map.remove("kind").ok_or_else(|| config_err("kind", "missing field"))?, "kind")?;
        let seed: u64 = typed(map.remove("seed").ok_or_else(|| config_err("seed", "missing field"))?, "seed")?;
        let output: PathBuf = typed(
            map.remove("output").ok_or_else(|| config_err("output", "missing field"))?,
            "output",
        )?;
        let params = map.remove("params").unwrap_or_else(|| Value::Object(Default::default()));
        if let Some(key) = map.keys().next() {
            return Err(config_err(key.clone(), "unknown field"));
        }
        let params = Params::parse(kind, params)?;
        let cfg = Self {
            kind,
            params,
            seed,
            output,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.kind() != self.kind {
            return Err(config_err("params", "parameters do not match the experiment kind"));
        }
        self.params.validate()
    }

    /// Canonical JSON (declaration key order, shortest round-trip numbers).
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn defaults_fill_missing_params() {
        let c = ExperimentConfig::from_value(json!({"kind": "kernel_check", "seed": 3, "output": "out"})).unwrap();
        assert_eq!(c.params, Params::KernelCheck(KernelCheckParams::default()));
        let again = ExperimentConfig::from_json(&c.canonical_json()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.sha256(), c.sha256());
    }

    #[test]
    fn first_failing_field_is_named() {
        let cases = [
            (json!({"seed": 1, "output": "o"}), "kind"),
            (json!({"kind": "nope", "seed": 1, "output": "o"}), "kind"),
            (json!({"kind": "kernel_check", "seed": -1, "output": "o"}), "seed"),
            (json!({"kind": "kernel_check", "seed": 1, "output": "o", "extra": 1}), "extra"),
            (
                json!({"kind": "kernel_check", "seed": 1, "output": "o", "params": {"s_values": [0.5, 1.5]}}),
                "params.s_values[1]",
            ),
            (
                json!({"kind": "estimate_sweep", "seed": 1, "output": "o", "params": {"plan": {"h": "x"}}}),
                "params.plan.h",
            ),
            (
                json!({"kind": "nmc_eval", "seed": 1, "output": "o", "params": {"typo": 1}}),
                "params.typo",
            ),
        ];
        for (v, want) in cases {
            match ExperimentConfig::from_value(v.clone()) {
                Err(Error::Config { field, .. }) => assert_eq!(field, want, "{v}"),
                other => panic!("{v}: {other:?}"),
            }
        }
    }
}
