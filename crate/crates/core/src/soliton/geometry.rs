//! Discrete geometry of a profile curve in the (x, r) half-plane.
//!
//! Tangents are central chords and profile curvature is the signed
//! curvature of the circle through three consecutive nodes. Both are exact
//! on uniformly sampled circles and lines, and second order on smooth
//! curves with smoothly varying spacing. Axis ends are closed off with a
//! mirror ghost node `(x, -r)`, which keeps the same exactness at the poles.

use crate::error::{Error, Result};

use super::{EndKind, Orientation, Topology};

pub(crate) type P2 = [f64; 2];

#[inline]
pub(crate) fn sub(a: P2, b: P2) -> P2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn norm(a: P2) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub(crate) fn cross(a: P2, b: P2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub(crate) fn dot(a: P2, b: P2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Signed curvature of the circle through `a`, `b`, `c` (positive for a
/// left turn).
pub(crate) fn circle_curvature(a: P2, b: P2, c: P2) -> f64 {
    let ab = sub(b, a);
    let bc = sub(c, b);
    let ac = sub(c, a);
    2.0 * cross(ab, bc) / (norm(ab) * norm(bc) * norm(ac))
}

/// Per-node geometric tables.
#[derive(Debug, Clone)]
pub(crate) struct Tables {
    pub tangent: Vec<P2>,
    pub normal: Vec<P2>,
    pub kappa: Vec<f64>,
    pub mean_curvature: Vec<f64>,
    pub a2: Vec<f64>,
    pub xdotnu: Vec<f64>,
    pub rtilde: Vec<f64>,
    /// Arclength quadrature cell of each node.
    pub cell: Vec<f64>,
    pub theta: Vec<f64>,
}

/// Neighbour positions of node `i`, with ghosts at axis ends. `None` marks a
/// free end, which is handled one-sidedly.
pub(crate) fn neighbours(pos: &[P2], topology: Topology, i: usize) -> (Option<P2>, Option<P2>) {
    let m = pos.len();
    let mirror = |p: P2| [p[0], -p[1]];
    match topology {
        Topology::Periodic => (Some(pos[(i + m - 1) % m]), Some(pos[(i + 1) % m])),
        Topology::Ends { start, end } => {
            let prev = if i > 0 {
                Some(pos[i - 1])
            } else {
                match start {
                    EndKind::Axis => Some(mirror(pos[0])),
                    EndKind::Free => None,
                }
            };
            let next = if i + 1 < m {
                Some(pos[i + 1])
            } else {
                match end {
                    EndKind::Axis => Some(mirror(pos[m - 1])),
                    EndKind::Free => None,
                }
            };
            (prev, next)
        }
    }
}

pub(crate) fn compute(pos: &[P2], topology: Topology, orientation: Orientation, n: usize) -> Result<Tables> {
    let m = pos.len();
    if m < 3 {
        return Err(Error::validation(format!("profile needs at least 3 points, got {m}")));
    }
    for (i, p) in pos.iter().enumerate() {
        if !(p[0].is_finite() && p[1].is_finite()) {
            return Err(Error::numerical(format!("non-finite profile point at node {i}")));
        }
        if p[1] <= 0.0 {
            return Err(Error::validation(format!(
                "profile node {i} has r = {} (nodes must lie strictly off the axis)",
                p[1]
            )));
        }
    }
    let sgn = orientation.sign();
    let nm1 = (n - 1) as f64;

    let mut tangent = Vec::with_capacity(m);
    let mut kappa = Vec::with_capacity(m);
    let mut cell = Vec::with_capacity(m);
    for i in 0..m {
        let p = pos[i];
        let (prev, next) = neighbours(pos, topology, i);
        let (t, k, c) = match (prev, next) {
            (Some(a), Some(b)) => {
                let da = norm(sub(p, a));
                let db = norm(sub(b, p));
                let chord = sub(b, a);
                let len = norm(chord);
                if da == 0.0 || db == 0.0 || len == 0.0 {
                    return Err(Error::numerical(format!("degenerate profile: repeated point at node {i}")));
                }
                ([chord[0] / len, chord[1] / len], circle_curvature(a, p, b), 0.5 * (da + db))
            }
            (None, Some(b)) => {
                // free start: one-sided second-order tangent
                let c2 = pos[i + 2];
                let d = [-3.0 * p[0] + 4.0 * b[0] - c2[0], -3.0 * p[1] + 4.0 * b[1] - c2[1]];
                let len = norm(d);
                let db = norm(sub(b, p));
                if len == 0.0 || db == 0.0 || norm(sub(c2, b)) == 0.0 {
                    return Err(Error::numerical(format!("degenerate profile: repeated point at node {i}")));
                }
                ([d[0] / len, d[1] / len], circle_curvature(p, b, c2), 0.5 * db)
            }
            (Some(a), None) => {
                let a2 = pos[i - 2];
                let d = [3.0 * p[0] - 4.0 * a[0] + a2[0], 3.0 * p[1] - 4.0 * a[1] + a2[1]];
                let len = norm(d);
                let da = norm(sub(p, a));
                if len == 0.0 || da == 0.0 || norm(sub(a, a2)) == 0.0 {
                    return Err(Error::numerical(format!("degenerate profile: repeated point at node {i}")));
                }
                ([d[0] / len, d[1] / len], circle_curvature(a2, a, p), 0.5 * da)
            }
            (None, None) => unreachable!("profiles have at least three nodes"),
        };
        tangent.push(t);
        kappa.push(k);
        cell.push(c);
    }

    let mut normal = Vec::with_capacity(m);
    let mut mean_curvature = Vec::with_capacity(m);
    let mut a2 = Vec::with_capacity(m);
    let mut xdotnu = Vec::with_capacity(m);
    let mut rtilde = Vec::with_capacity(m);
    let mut theta = Vec::with_capacity(m);
    let mut prev_theta: Option<f64> = None;
    for i in 0..m {
        let t = tangent[i];
        let p = pos[i];
        let nu = [sgn * t[1], -sgn * t[0]];
        let rot = nu[1] / p[1];
        mean_curvature.push(sgn * kappa[i] + nm1 * rot);
        a2.push(kappa[i] * kappa[i] + nm1 * rot * rot);
        xdotnu.push(dot(p, nu));
        rtilde.push((1.0 + p[0] * p[0] + p[1] * p[1]).sqrt());
        normal.push(nu);
        let mut th = t[1].atan2(t[0]);
        if let Some(pt) = prev_theta {
            let two_pi = std::f64::consts::TAU;
            th += two_pi * ((pt - th) / two_pi).round();
        }
        prev_theta = Some(th);
        theta.push(th);
    }

    Ok(Tables { tangent, normal, kappa, mean_curvature, a2, xdotnu, rtilde, cell, theta })
}

/// Cumulative chord length, starting at `s0`.
pub(crate) fn chord_arclength(pos: &[P2], s0: f64) -> Vec<f64> {
    let mut s = Vec::with_capacity(pos.len());
    let mut acc = s0;
    for (i, p) in pos.iter().enumerate() {
        if i > 0 {
            acc += norm(sub(*p, pos[i - 1]));
        }
        s.push(acc);
    }
    s
}
