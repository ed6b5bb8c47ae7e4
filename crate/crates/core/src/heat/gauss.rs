use serde::{Deserialize, Serialize};

use super::HeatField;
use crate::error::{invalid, Error, Result};
use crate::geometry::dist;
use crate::quad::linear_fit;

/// One observation H(t, x, y) with Euclidean distance |x − y|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSample {
    pub t: f64,
    pub distance: f64,
    pub value: f64,
}

/// Fitted envelope H ≤ C t^{-n/2} exp(−c|x−y|²/t).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianFit {
    #[serde(rename = "C")]
    pub big_c: f64,
    pub c: f64,
    pub r2: f64,
    /// Smallest factor λ ≥ 1 with every sample ≤ λ·envelope.
    pub needed_slack: f64,
    pub slack: f64,
    pub pass: bool,
    pub samples: usize,
}

impl GaussianSample {
    /// Samples of a heat field with d²/t ≤ `max_ratio` and value above `floor`.
    pub fn from_field(field: &HeatField, max_ratio: f64, floor: f64) -> Vec<Self> {
        (0..field.grid.len())
            .filter_map(|i| {
                let y = field.grid.coords(i);
                let d = dist(&y, &field.source);
                let v = field.values[i];
                (d * d / field.t <= max_ratio && v > floor).then_some(Self {
                    t: field.t,
                    distance: d,
                    value: v,
                })
            })
            .collect()
    }
}

/// Ratio max H / (C t^{-n/2} e^{-c d²/t}) over the samples.
pub fn envelope_ratio(samples: &[GaussianSample], n: usize, big_c: f64, c: f64) -> f64 {
    samples
        .iter()
        .map(|s| s.value / (big_c * s.t.powf(-(n as f64) / 2.0) * (-c * s.distance * s.distance / s.t).exp()))
        .fold(0.0, f64::max)
}

/// Least-squares fit of log H + (n/2) log t = log C − c d²/t; passes iff
/// every sample lies below `slack` times the fitted envelope.
pub fn gaussian_bound_fit(samples: &[GaussianSample], n: usize, slack: f64) -> Result<GaussianFit> {
    if !(slack >= 1.0) {
        return Err(invalid("slack", "must be at least 1"));
    }
    let t0 = samples.first().map(|s| s.t).ok_or_else(|| Error::InsufficientSamples("no samples".into()))?;
    if samples.iter().all(|s| (s.t - t0).abs() <= 1e-14 * t0) {
        return Err(Error::InsufficientSamples("all samples share one time".into()));
    }
    if samples.iter().any(|s| !(s.value > 0.0) || !(s.t > 0.0)) {
        return Err(invalid("samples", "values and times must be positive"));
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.distance * s.distance / s.t).collect();
    let ys: Vec<f64> = samples
        .iter()
        .map(|s| s.value.ln() + 0.5 * n as f64 * s.t.ln())
        .collect();
    let (slope, intercept, r2) = linear_fit(&xs, &ys);
    let big_c = intercept.exp();
    let c = -slope;
    let needed = envelope_ratio(samples, n, big_c, c).max(1.0);
    Ok(GaussianFit {
        big_c,
        c,
        r2,
        needed_slack: needed,
        slack,
        pass: needed <= slack,
        samples: samples.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_gaussian_recovered() {
        let mut s = vec![];
        for &t in &[0.05, 0.1, 0.5] {
            for k in 0..20 {
                let d = 0.05 * k as f64;
                let v = (4.0 * std::f64::consts::PI * t).powf(-1.0) * (-d * d / (4.0 * t)).exp();
                s.push(GaussianSample { t, distance: d, value: v });
            }
        }
        let f = gaussian_bound_fit(&s, 2, 1.0 + 1e-9).unwrap();
        assert!((f.big_c - 1.0 / (4.0 * std::f64::consts::PI)).abs() < 1e-12);
        assert!((f.c - 0.25).abs() < 1e-12);
        assert!(f.pass);
    }

    #[test]
    fn single_time_rejected() {
        let s = vec![
            GaussianSample { t: 1.0, distance: 0.0, value: 1.0 },
            GaussianSample { t: 1.0, distance: 1.0, value: 0.5 },
        ];
        assert!(matches!(gaussian_bound_fit(&s, 1, 2.0), Err(Error::InsufficientSamples(_))));
    }
}
