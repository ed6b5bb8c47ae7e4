use serde::{Deserialize, Serialize};

use super::region::{dist, dot, norm};
use crate::error::{invalid, Result};

/// {p : |p − center| ≤ radius, |(p − center)·ν| ≤ half_width}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub center: Vec<f64>,
    pub direction: Vec<f64>,
    pub radius: f64,
    pub half_width: f64,
}

impl Cylinder {
    pub fn new(center: Vec<f64>, direction: Vec<f64>, radius: f64, half_width: f64) -> Result<Self> {
        if center.len() != direction.len() {
            return Err(invalid("direction", "dimension differs from center"));
        }
        if (norm(&direction) - 1.0).abs() > 1e-9 {
            return Err(invalid("direction", "must be a unit vector"));
        }
        if !(half_width >= 0.0) || !(radius > 0.0) {
            return Err(invalid("half_width", "need half_width >= 0 and radius > 0"));
        }
        Ok(Self {
            center,
            direction,
            radius,
            half_width,
        })
    }
}

/// True iff every point within `radius` of the center lies in the slab.
pub fn cylinder_contains(points: &[Vec<f64>], cyl: &Cylinder) -> bool {
    points.iter().all(|p| {
        if dist(p, &cyl.center) > cyl.radius {
            return true;
        }
        let d: Vec<f64> = p.iter().zip(&cyl.center).map(|(a, c)| a - c).collect();
        dot(&d, &cyl.direction).abs() <= cyl.half_width
    })
}

/// The pair (s, α) with 0 < α < s < 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OrderRaw")]
pub struct FractionalOrder {
    s: f64,
    alpha: f64,
}

#[derive(Deserialize)]
struct OrderRaw {
    s: f64,
    alpha: f64,
}

impl TryFrom<OrderRaw> for FractionalOrder {
    type Error = crate::error::Error;
    fn try_from(r: OrderRaw) -> Result<Self> {
        Self::new(r.s, r.alpha)
    }
}

impl FractionalOrder {
    pub fn new(s: f64, alpha: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(invalid("s", "must lie in (0, 1)"));
        }
        if !(alpha > 0.0 && alpha < s) {
            return Err(invalid("alpha", "must lie in (0, s)"));
        }
        Ok(Self { s, alpha })
    }

    /// Order s with α = s/2.
    pub fn with_default_alpha(s: f64) -> Result<Self> {
        Self::new(s, 0.5 * s)
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

pub(crate) fn check_s(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(invalid("s", "must lie in (0, 1)"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_points_fit_any_width() {
        let pts: Vec<Vec<f64>> = (0..21).map(|i| vec![-1.0 + 0.1 * i as f64, 0.0]).collect();
        let c = Cylinder::new(vec![0.0, 0.0], vec![0.0, 1.0], 1.0, 0.0).unwrap();
        assert!(cylinder_contains(&pts, &c));
    }

    #[test]
    fn tall_point_escapes() {
        let pts = vec![vec![0.0, 0.3]];
        let c = Cylinder::new(vec![0.0, 0.0], vec![0.0, 1.0], 1.0, 0.2).unwrap();
        assert!(!cylinder_contains(&pts, &c));
    }

    #[test]
    fn sine_graph_within_its_amplitude() {
        let pts: Vec<Vec<f64>> = (0..2001)
            .map(|i| {
                let x = -1.0 + 0.001 * i as f64;
                vec![x, 0.1 * (5.0 * x).sin()]
            })
            .collect();
        let c = Cylinder::new(vec![0.0, 0.0], vec![0.0, 1.0], 1.0, 0.1).unwrap();
        assert!(cylinder_contains(&pts, &c));
    }

    #[test]
    fn order_bounds() {
        assert!(FractionalOrder::new(0.5, 0.25).is_ok());
        assert!(FractionalOrder::new(0.5, 0.5).is_err());
        assert!(FractionalOrder::new(1.0, 0.2).is_err());
        let parsed: std::result::Result<FractionalOrder, _> = serde_json::from_str(r#"{"s":0.3,"alpha":0.4}"#);
        assert!(parsed.is_err());
    }
}
