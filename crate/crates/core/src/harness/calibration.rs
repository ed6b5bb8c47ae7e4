use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::path::Path;

use super::config::typed;
use super::experiments::hypothesis_depth;
use super::graded_abscissae;
use crate::error::{Error, Result};
use crate::flatness::{dichotomy, Branch};
use crate::geometry::{GraphProfile, MetricField};
use crate::heat::SolvePlan;
use crate::kernel::{r_sweep, BudgetConstants, EstimateKind, SweepReport};
use crate::special::{cns, cosine_symbol, sphere_area};

pub const CALIBRATION_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CalibrationFamily {
    Euclidean,
    /// g(x) = 1 + a sin(kx + φ) with φ drawn from the seed.
    Sinusoidal { amplitude: f64, frequency: f64 },
}

/// Bounded-curvature sine graphs f(x) = A sin(ωx + φ) with the linearized
/// curvature amplitude P·A_{1+s}·ω^{1+s}·A capped at `c0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnackFamily {
    pub alpha: f64,
    pub c0: f64,
    pub max_amplitude: f64,
    pub frequencies: Vec<f64>,
    pub phases: usize,
    pub delta_candidates: Vec<f64>,
    pub k_cap: usize,
    pub levels: usize,
    pub per_shell: usize,
}

impl Default for HarnackFamily {
    fn default() -> Self {
        Self {
            alpha: 0.25,
            c0: 0.1,
            max_amplitude: 0.25,
            frequencies: vec![0.5, 1.0, 2.0, 4.0, 8.0, 16.0],
            phases: 4,
            delta_candidates: (1..=19).map(|i| i as f64 / 20.0).collect(),
            k_cap: 8,
            levels: 14,
            per_shell: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub n: usize,
    pub s: f64,
    pub family: CalibrationFamily,
    /// Family members (phases) per sweep.
    pub phases: usize,
    pub radii: Vec<f64>,
    pub plan: SolvePlan,
    pub budget: BudgetConstants,
    /// Fitted constants are multiplied by this factor.
    pub margin: f64,
    pub harnack: HarnackFamily,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            n: 1,
            s: 0.5,
            family: CalibrationFamily::Sinusoidal {
                amplitude: 0.4,
                frequency: 1.0,
            },
            phases: 4,
            radii: vec![1.0, 0.5, 0.25, 0.125],
            plan: SolvePlan::default(),
            budget: BudgetConstants::default(),
            margin: 1.25,
            harnack: HarnackFamily::default(),
        }
    }
}

fn cfg_err(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

impl CalibrationConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| cfg_err("<root>", e.to_string()))?;
        let c: Self = typed(v, "family")?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.n) {
            return Err(cfg_err("family.n", "supported dimensions are 1 and 2"));
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(cfg_err("family.s", "must lie in (0, 1)"));
        }
        if matches!(self.family, CalibrationFamily::Sinusoidal { .. }) && self.n != 1 {
            return Err(cfg_err("family.family", "the sinusoidal family is one-dimensional"));
        }
        if self.phases == 0 {
            return Err(cfg_err("family.phases", "must be at least 1"));
        }
        if self.radii.len() < 2 || self.radii.iter().any(|r| !(*r > 0.0)) {
            return Err(cfg_err("family.radii", "need at least two positive radii"));
        }
        self.plan.validate().map_err(|e| cfg_err("family.plan", e.to_string()))?;
        if !(self.margin >= 1.0) {
            return Err(cfg_err("family.margin", "must be at least 1"));
        }
        let h = &self.harnack;
        if !(h.alpha > 0.0 && h.alpha < self.s) {
            return Err(cfg_err("family.harnack.alpha", "need 0 < alpha < s"));
        }
        if !(h.c0 > 0.0) || !(h.max_amplitude > 0.0) {
            return Err(cfg_err("family.harnack.c0", "c0 and max_amplitude must be positive"));
        }
        if h.frequencies.is_empty() || h.frequencies.iter().any(|w| !(*w > 0.0)) {
            return Err(cfg_err("family.harnack.frequencies", "need positive frequencies"));
        }
        if h.delta_candidates.is_empty() || h.delta_candidates.iter().any(|d| !(*d > 0.0 && *d < 1.0)) {
            return Err(cfg_err("family.harnack.delta_candidates", "need candidates in (0, 1)"));
        }
        if h.phases == 0 || h.per_shell == 0 {
            return Err(cfg_err("family.harnack.phases", "phases and per_shell must be positive"));
        }
        Ok(())
    }

    fn base_metrics(&self, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<MetricField>) {
        match &self.family {
            CalibrationFamily::Euclidean => (vec![], vec![MetricField::euclidean(self.n)]),
            CalibrationFamily::Sinusoidal { amplitude, frequency } => {
                let phases: Vec<f64> = (0..self.phases).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
                let m = phases
                    .iter()
                    .map(|&p| MetricField::sinusoidal_1d(*amplitude, *frequency, p))
                    .collect();
                (phases, m)
            }
        }
    }
}

/// One family member of the Harnack calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnackMember {
    pub frequency: f64,
    pub phase: f64,
    pub amplitude: f64,
    /// Deepest scale whose hypothesis cylinders hold, capped; None when
    /// the l = 0 cylinder already fails.
    pub hypothesis_depth: Option<usize>,
    /// Largest candidate δ with no "neither" outcome for k ≤ depth.
    pub largest_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationDiagnostics {
    pub metric_phases: Vec<f64>,
    pub effacement: Vec<SweepReport>,
    pub dirichlet: Vec<SweepReport>,
    pub harnack: Vec<HarnackMember>,
}

/// Frozen constants for the estimate certifiers and the Harnack falsifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// "<schema>-<first 12 hex digits of the content hash>".
    pub version: String,
    pub schema: u32,
    pub crate_version: String,
    pub seed: u64,
    pub n: usize,
    pub s: f64,
    pub family: String,
    #[serde(rename = "C_effacement")]
    pub c_effacement: f64,
    #[serde(rename = "C_tail")]
    pub c_tail: f64,
    #[serde(rename = "C_dirichlet")]
    pub c_dirichlet: f64,
    pub delta_harnack: f64,
    pub k0: usize,
    pub harnack_alpha: f64,
    pub harnack_s: f64,
    pub config: CalibrationConfig,
    pub diagnostics: CalibrationDiagnostics,
}

impl Calibration {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("calibration serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        if c.schema != CALIBRATION_SCHEMA {
            return Err(Error::Calibration(format!(
                "schema {} is not supported (expected {CALIBRATION_SCHEMA})",
                c.schema
            )));
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Writes the file, refusing to replace an existing one unless
    /// `overwrite` is set.
    pub fn write(&self, path: &Path, overwrite: bool) -> Result<()> {
        if path.exists() && !overwrite {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::AlreadyExists,
                format!("{} exists; pass the overwrite flag to replace it", path.display()),
            )));
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    fn stamp(mut self) -> Self {
        self.version = String::new();
        let digest = hex::encode(Sha256::digest(serde_json::to_string(&self).expect("serializes").as_bytes()));
        self.version = format!("{}-{}", CALIBRATION_SCHEMA, &digest[..12]);
        self
    }
}

fn sweep_table(rep: &SweepReport) -> String {
    let mut t = String::from("r,value\n");
    for row in &rep.rows {
        t.push_str(&format!("{},{}\n", row.r, row.value));
    }
    t
}

/// Values must decrease strictly as r grows (or vanish identically).
fn check_monotone(rep: &SweepReport, label: &str) -> Result<()> {
    if rep.rows.iter().all(|r| r.value == 0.0) {
        return Ok(());
    }
    let mut rows = rep.rows.clone();
    rows.sort_by(|a, b| a.r.total_cmp(&b.r));
    let ok = rows.windows(2).all(|w| w[1].value < w[0].value) && rows.iter().all(|r| r.value > 0.0);
    if ok {
        Ok(())
    } else {
        Err(Error::Calibration(format!("{label} sweep is not monotone in r:\n{}", sweep_table(rep))))
    }
}

/// Abscissae of a graph sample, graded toward 0 (see [`graded_abscissae`]),
/// lifted to the translated graph points (x, f(x) − f(0)).
fn member_points(f: &GraphProfile, levels: usize, per_shell: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let f0 = f.eval1(0.0);
    graded_abscissae(0.0, levels, per_shell, Some(rng))
        .into_iter()
        .map(|x| vec![x, f.eval1(x) - f0])
        .collect()
}

fn no_neither(points: &[Vec<f64>], delta: f64, depth: usize, alpha: f64) -> Result<bool> {
    for k in 0..=depth {
        if dichotomy(points, delta, k, alpha, 1.0)?.branch == Branch::Neither {
            return Ok(false);
        }
    }
    Ok(true)
}

fn calibrate_harnack(cfg: &CalibrationConfig, rng: &mut ChaCha8Rng) -> Result<(f64, usize, Vec<HarnackMember>)> {
    let h = &cfg.harnack;
    let s = cfg.s;
    let symbol = 2.0 * cns(2, s) * cosine_symbol(1.0 + s);
    let mut candidates = h.delta_candidates.clone();
    candidates.sort_by(|a, b| b.total_cmp(a));
    let mut members = Vec::new();
    let mut clouds = Vec::new();
    for &w in &h.frequencies {
        let amplitude = (h.c0 / (symbol * w.powf(1.0 + s))).min(h.max_amplitude);
        for _ in 0..h.phases {
            let phase = rng.gen_range(0.0..2.0 * PI);
            let f = GraphProfile::sine_1d(amplitude, w, phase);
            let pts = member_points(&f, h.levels, h.per_shell, rng);
            let depth = hypothesis_depth(&pts, h.alpha, h.k_cap)?;
            let mut largest = None;
            if let Some(d) = depth {
                for &delta in &candidates {
                    if no_neither(&pts, delta, d, h.alpha)? {
                        largest = Some(delta);
                        break;
                    }
                }
            }
            members.push(HarnackMember {
                frequency: w,
                phase,
                amplitude,
                hypothesis_depth: depth,
                largest_delta: largest,
            });
            clouds.push(pts);
        }
    }
    let depths: Vec<usize> = members.iter().filter_map(|m| m.hypothesis_depth).collect();
    let k0 = *depths
        .iter()
        .min()
        .ok_or_else(|| Error::Calibration("no Harnack family member satisfies the l = 0 cylinder".into()))?;
    let mut delta = None;
    'cand: for &d in &candidates {
        for (m, pts) in members.iter().zip(&clouds) {
            if let Some(depth) = m.hypothesis_depth {
                if !no_neither(pts, d, depth, h.alpha)? {
                    continue 'cand;
                }
            }
        }
        delta = Some(d);
        break;
    }
    let delta = delta.ok_or_else(|| Error::Calibration("every candidate delta produced a 'neither' outcome".into()))?;
    Ok((delta, k0, members))
}

/// Fits the certifier constants on the configured family: C_effacement and
/// C_dirichlet are `margin` times the largest value·r^s over every sweep,
/// C_tail is the closed form ω_{n−1}C_{n,s}/s, and (δ, k₀) come from the
/// Harnack family. Deterministic in (config, seed).
pub fn calibrate(cfg: &CalibrationConfig, seed: u64) -> Result<Calibration> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (metric_phases, metrics) = cfg.base_metrics(&mut rng);
    let mut effacement = Vec::new();
    let mut dirichlet = Vec::new();
    for m in &metrics {
        let e = r_sweep(EstimateKind::Effacement, m, &cfg.radii, cfg.s, &cfg.plan, &cfg.budget, None)?;
        check_monotone(&e, "effacement")?;
        effacement.push(e);
        let d = r_sweep(EstimateKind::DirichletGap, m, &cfg.radii, cfg.s, &cfg.plan, &cfg.budget, None)?;
        check_monotone(&d, "dirichlet gap")?;
        dirichlet.push(d);
    }
    let fitted = |reps: &[SweepReport]| reps.iter().map(|r| r.fitted_constant).fold(0.0, f64::max) * cfg.margin;
    let (delta, k0, harnack) = calibrate_harnack(cfg, &mut rng)?;
    let family = match &cfg.family {
        CalibrationFamily::Euclidean => "euclidean".to_string(),
        CalibrationFamily::Sinusoidal { .. } => "sinusoidal".to_string(),
    };
    Ok(Calibration {
        version: String::new(),
        schema: CALIBRATION_SCHEMA,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        n: cfg.n,
        s: cfg.s,
        family,
        c_effacement: fitted(&effacement),
        c_tail: sphere_area(cfg.n) * cns(cfg.n, cfg.s) / cfg.s,
        c_dirichlet: fitted(&dirichlet),
        delta_harnack: delta,
        k0,
        harnack_alpha: cfg.harnack.alpha,
        harnack_s: cfg.s,
        config: cfg.clone(),
        diagnostics: CalibrationDiagnostics {
            metric_phases,
            effacement,
            dirichlet,
            harnack,
        },
    }
    .stamp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::SweepRow;

    #[test]
    fn non_monotone_sweep_reports_table() {
        let row = |r: f64, value: f64| SweepRow {
            r,
            value,
            bound: None,
            pass: true,
        };
        let rep = SweepReport {
            kind: EstimateKind::Effacement,
            s: 0.5,
            rows: vec![row(1.0, 1.0), row(0.5, 0.8), row(0.25, 2.0)],
            slope: f64::NAN,
            intercept: f64::NAN,
            r2: f64::NAN,
            fitted_constant: 1.0,
        };
        match check_monotone(&rep, "effacement") {
            Err(Error::Calibration(msg)) => assert!(msg.contains("r,value") && msg.contains("0.5,0.8"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }
}
