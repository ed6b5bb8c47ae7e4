//! Experiment configuration, calibration files and reports.

mod calibration;
mod config;
mod experiments;
mod report;

pub use calibration::{
    calibrate, Calibration, CalibrationConfig, CalibrationDiagnostics, CalibrationFamily, HarnackFamily, HarnackMember,
    CALIBRATION_SCHEMA,
};
pub use config::{
    EstimateSweepParams, ExperimentConfig, ExperimentKind, FlatnessPipelineParams, HeatCheckParams, KernelCheckParams,
    NmcEvalParams, Params, PerimeterEvalParams, SolveAndVerifyParams,
};
pub use experiments::run;
pub use report::{Check, Report, Table};

use rand::Rng;

/// `base`, then `per_shell` abscissae on each side of it in every dyadic
/// shell 2^{-l-1} < |x − base| ≤ 2^{-l}, l < levels, and as many on
/// 1 < |x − base| ≤ 2. Regularly spaced, or uniform at random per shell
/// when `rng` is given.
pub fn graded_abscissae<R: Rng>(base: f64, levels: usize, per_shell: usize, mut rng: Option<&mut R>) -> Vec<f64> {
    let mut xs = vec![base];
    let mut shell = |lo: f64, hi: f64, xs: &mut Vec<f64>| {
        for i in 0..per_shell {
            for side in [1.0, -1.0] {
                let u = match rng.as_deref_mut() {
                    Some(r) => r.gen_range(0.0..1.0),
                    None => (i as f64 + 0.5) / per_shell as f64,
                };
                xs.push(base + side * (lo + (hi - lo) * u));
            }
        }
    };
    for l in 0..levels {
        shell(0.5f64.powi(l as i32 + 1), 0.5f64.powi(l as i32), &mut xs);
    }
    shell(1.0, 2.0, &mut xs);
    xs
}
