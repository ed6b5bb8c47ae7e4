use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform tensor grid restricted to a closed ball. Sup-norm hypotheses are
/// certified as maxima over these points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationGrid {
    pub center: Vec<f64>,
    pub radius: f64,
    pub spacing: f64,
}

impl VerificationGrid {
    pub fn new(center: Vec<f64>, radius: f64, spacing: f64) -> Self {
        Self {
            center,
            radius,
            spacing,
        }
    }

    /// Grid on B_radius(0) with the default spacing radius / 64.
    pub fn centered(dim: usize, radius: f64) -> Self {
        Self::new(vec![0.0; dim], radius, radius / 64.0)
    }

    pub fn points(&self) -> Result<Vec<Vec<f64>>> {
        if !(self.spacing > 0.0) || !(self.radius >= 0.0) || self.center.is_empty() {
            return Err(Error::EmptyGrid);
        }
        let n = self.center.len();
        let m = (self.radius / self.spacing + 1e-9).floor() as i64;
        let side = (2 * m + 1) as usize;
        let total = side.checked_pow(n as u32).ok_or(Error::EmptyGrid)?;
        if total > 20_000_000 {
            return Err(Error::InvalidParameter {
                name: "spacing",
                reason: format!("grid with {total} points is too large"),
            });
        }
        let mut out = Vec::new();
        let mut idx = vec![-m; n];
        let r2 = self.radius * self.radius * (1.0 + 1e-12);
        loop {
            let p: Vec<f64> = idx
                .iter()
                .zip(&self.center)
                .map(|(i, c)| c + *i as f64 * self.spacing)
                .collect();
            let d2: f64 = p.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum();
            if d2 <= r2 {
                out.push(p);
            }
            let mut k = 0;
            loop {
                if k == n {
                    if out.is_empty() {
                        return Err(Error::EmptyGrid);
                    }
                    return Ok(out);
                }
                idx[k] += 1;
                if idx[k] > m {
                    idx[k] = -m;
                    k += 1;
                } else {
                    break;
                }
            }
        }
    }
}
