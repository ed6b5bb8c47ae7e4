//! Thinnest slab {|(p − c)·ν − m| ≤ w} containing a point cloud.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist, dot, norm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderFit {
    /// Unit normal of the slab.
    pub direction: Vec<f64>,
    /// Half-width w.
    pub width: f64,
    /// Offset m of the slab midplane along ν, relative to the center.
    pub offset: f64,
    /// Points inside the ball.
    pub count: usize,
}

/// Sign convention: the last nonzero component is positive, so graphs over
/// the first n − 1 coordinates get ν close to +eₙ.
pub(crate) fn orient(mut v: Vec<f64>) -> Vec<f64> {
    if let Some(&last) = v.iter().rev().find(|x| x.abs() > 1e-15) {
        if last < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    v
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

fn extent(pts: &[Vec<f64>], nu: &[f64]) -> (f64, f64) {
    pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let v = dot(p, nu);
        (lo.min(v), hi.max(v))
    })
}

/// Monotone-chain convex hull, counter-clockwise, no collinear points.
fn hull(pts: &[Vec<f64>]) -> Vec<[f64; 2]> {
    let mut p: Vec<[f64; 2]> = pts.iter().map(|q| [q[0], q[1]]).collect();
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let chain = |it: &mut dyn Iterator<Item = &[f64; 2]>| {
        let mut h: Vec<[f64; 2]> = Vec::new();
        for &q in it {
            while h.len() >= 2 && cross(h[h.len() - 2], h[h.len() - 1], q) <= 0.0 {
                h.pop();
            }
            h.push(q);
        }
        h.pop();
        h
    };
    let mut h = chain(&mut p.iter());
    h.extend(chain(&mut p.iter().rev()));
    h
}

/// Minimum width over hull edge normals (rotating calipers).
fn planar_fit(pts: &[Vec<f64>]) -> Vec<f64> {
    let h = hull(pts);
    let m = h.len();
    if m < 3 {
        // collinear cloud
        let (a, b) = (h[0], h[m - 1]);
        let d = [b[0] - a[0], b[1] - a[1]];
        let l = (d[0] * d[0] + d[1] * d[1]).sqrt();
        return orient(vec![-d[1] / l, d[0] / l]);
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut j = 1;
    for i in 0..m {
        let (a, b) = (h[i], h[(i + 1) % m]);
        let d = [b[0] - a[0], b[1] - a[1]];
        let l = (d[0] * d[0] + d[1] * d[1]).sqrt();
        let nu = [-d[1] / l, d[0] / l];
        let depth = |q: [f64; 2]| ((q[0] - a[0]) * nu[0] + (q[1] - a[1]) * nu[1]).abs();
        while depth(h[(j + 1) % m]) >= depth(h[j]) && (j + 1) % m != i {
            j = (j + 1) % m;
        }
        let w = depth(h[j]);
        let cand = orient(nu.to_vec());
        let better = match &best {
            None => true,
            Some((bw, bv)) => w < *bw * (1.0 - 1e-12) || (w <= *bw * (1.0 + 1e-12) && lex_less(&cand, bv)),
        };
        if better {
            best = Some((w, cand));
        }
    }
    best.expect("hull has edges").1
}

/// Pattern search on the sphere started from the smallest principal axis.
fn spatial_fit(pts: &[Vec<f64>], start: Vec<f64>) -> Vec<f64> {
    let n = start.len();
    let width = |v: &[f64]| {
        let (lo, hi) = extent(pts, v);
        hi - lo
    };
    let mut nu = start;
    let mut w = width(&nu);
    let mut step = 0.1;
    while step > 1e-10 {
        let mut moved = false;
        for k in 0..n {
            for sg in [1.0, -1.0] {
                let mut c = nu.clone();
                c[k] += sg * step;
                let l = norm(&c);
                c.iter_mut().for_each(|x| *x /= l);
                let wc = width(&c);
                if wc < w {
                    nu = c;
                    w = wc;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    orient(nu)
}

fn smallest_axis(pts: &[Vec<f64>]) -> Vec<f64> {
    let n = pts[0].len();
    let k = pts.len() as f64;
    let mean: Vec<f64> = (0..n).map(|i| pts.iter().map(|p| p[i]).sum::<f64>() / k).collect();
    let mut cov = DMatrix::<f64>::zeros(n, n);
    for p in pts {
        for i in 0..n {
            for j in 0..n {
                cov[(i, j)] += (p[i] - mean[i]) * (p[j] - mean[j]);
            }
        }
    }
    let eig = SymmetricEigen::new(cov);
    let i = eig.eigenvalues.imin();
    eig.eigenvectors.column(i).iter().copied().collect()
}

/// Thinnest slab through the points of the cloud inside B_radius(center).
pub fn fit_cylinder(points: &[Vec<f64>], center: &[f64], radius: f64) -> Result<CylinderFit> {
    let n = center.len();
    let local: Vec<Vec<f64>> = points
        .iter()
        .filter(|p| p.len() == n && dist(p, center) <= radius)
        .map(|p| p.iter().zip(center).map(|(a, c)| a - c).collect())
        .collect();
    if local.len() < n {
        return Err(Error::InsufficientSamples(format!(
            "{} points in the ball, need at least {n}",
            local.len()
        )));
    }
    if local.iter().all(|p| p == &local[0]) {
        return Err(Error::Degenerate("all points coincide".into()));
    }
    let nu = match n {
        1 => vec![1.0],
        2 => planar_fit(&local),
        _ => spatial_fit(&local, smallest_axis(&local)),
    };
    let (lo, hi) = extent(&local, &nu);
    Ok(CylinderFit {
        direction: nu,
        width: 0.5 * (hi - lo),
        offset: 0.5 * (hi + lo),
        count: local.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hyperplane_has_zero_width() {
        let pts: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 * 0.02 - 0.5, 0.3 * (i as f64 * 0.02 - 0.5)]).collect();
        let f = fit_cylinder(&pts, &[0.0, 0.0], 1.0).unwrap();
        assert!(f.width < 1e-14);
        let l = (1.0f64 + 0.09).sqrt();
        assert!((f.direction[0] + 0.3 / l).abs() < 1e-12 && (f.direction[1] - 1.0 / l).abs() < 1e-12);
    }

    #[test]
    fn square_ties_break_lexicographically() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]];
        let f = fit_cylinder(&pts, &[0.5, 0.5], 1.0).unwrap();
        assert_eq!(f.direction, vec![0.0, 1.0]);
        assert!((f.width - 0.5).abs() < 1e-15);
    }

    #[test]
    fn spatial_plane() {
        let mut pts = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                let (x, y) = (i as f64 * 0.1 - 0.45, j as f64 * 0.1 - 0.45);
                pts.push(vec![x, y, 0.2 * x - 0.1 * y + 0.001 * (x * 7.0).sin()]);
            }
        }
        let f = fit_cylinder(&pts, &[0.0, 0.0, 0.0], 1.0).unwrap();
        assert!(f.width <= 0.001 + 1e-9);
        assert!(f.direction[2] > 0.9);
    }
}
