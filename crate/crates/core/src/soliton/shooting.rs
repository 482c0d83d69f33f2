//! Shooting for rotationally symmetric solitons.
//!
//! The profile system is
//!
//! ```text
//! x' = cos(theta),  r' = sin(theta),
//! theta' = sigma (x sin(theta) - r cos(theta)) / 2 + (n - 1) cos(theta) / r,
//! ```
//!
//! which is the soliton equation `H = sigma <x, nu> / 2` written for the
//! right-hand normal. Integration is classic RK4 with a fixed step; regular
//! axis crossings start from the series of the smooth solution.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::parallel::{map_slice, Parallelism};

use super::{EndKind, Orientation, ProfilePoint, SolitonKind, SolitonMode, SymmetricSoliton, Topology};

/// State `(x, r, theta)` along the profile.
type State = [f64; 3];

const BLOWUP_CURVATURE: f64 = 1e6;
const DOUBLING_INTERVAL: usize = 32;
const DOUBLING_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum ShootInit {
    /// Leave the axis perpendicularly at `(x0, 0)` towards increasing r.
    Axis { x0: f64 },
    /// Start at an off-axis point with the given tangent angle.
    Point { x: f64, r: f64, theta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Reached the requested arclength.
    ArcLength,
    /// Came within one step of the axis while moving towards it.
    Axis,
    /// Curvature exceeded the blow-up threshold.
    BlowUp,
}

#[derive(Debug, Clone)]
pub struct ShotProfile {
    /// Off-axis points. An axis start is not included; the first point then
    /// sits half a step away from the axis.
    pub points: Vec<ProfilePoint>,
    pub termination: Termination,
    /// Largest step-doubling discrepancy observed.
    pub max_step_error: f64,
}

fn rhs(n: usize, sigma: f64, s: &State) -> State {
    let (x, r, th) = (s[0], s[1], s[2]);
    let (sn, cs) = th.sin_cos();
    [cs, sn, sigma * 0.5 * (x * sn - r * cs) + (n as f64 - 1.0) * cs / r]
}

fn rk4(n: usize, sigma: f64, s: &State, h: f64) -> State {
    let add = |a: &State, k: &State, c: f64| [a[0] + c * k[0], a[1] + c * k[1], a[2] + c * k[2]];
    let k1 = rhs(n, sigma, s);
    let k2 = rhs(n, sigma, &add(s, &k1, h / 2.0));
    let k3 = rhs(n, sigma, &add(s, &k2, h / 2.0));
    let k4 = rhs(n, sigma, &add(s, &k3, h));
    [
        s[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        s[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        s[2] + h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
    ]
}

/// Regular solution leaving the axis at `(x0, 0)`, evaluated at arclength `s`.
fn axis_series(n: usize, sigma: f64, x0: f64, s: f64) -> State {
    let nf = n as f64;
    let k = sigma * x0 / (2.0 * nf);
    let c = sigma * k * (1.0 - x0 * k) / (4.0 * (nf + 2.0));
    let s2 = s * s;
    [
        x0 - k * s2 / 2.0 - (c - k * k * k / 6.0) * s2 * s2 / 4.0,
        s - k * k * s2 * s / 6.0,
        PI / 2.0 + k * s + c * s2 * s,
    ]
}

fn point(s: f64, st: &State) -> ProfilePoint {
    ProfilePoint { s, x: st[0], r: st[1], theta: st[2] }
}

/// Step-doubling discrepancy of one RK4 step.
fn doubling_error(n: usize, sigma: f64, st: &State, h: f64) -> f64 {
    let full = rk4(n, sigma, st, h);
    let half = rk4(n, sigma, &rk4(n, sigma, st, h / 2.0), h / 2.0);
    (0..3).map(|i| (full[i] - half[i]).abs()).fold(0.0, f64::max)
}

fn initial_state(n: usize, sigma: f64, init: ShootInit, ds: f64) -> Result<(f64, State)> {
    match init {
        ShootInit::Axis { x0 } => {
            ensure(x0.is_finite(), || "axis start must be finite".into())?;
            Ok((ds / 2.0, axis_series(n, sigma, x0, ds / 2.0)))
        }
        ShootInit::Point { x, r, theta } => {
            ensure(r > 0.0 && x.is_finite() && theta.is_finite(), || {
                format!("off-axis start needs r > 0 and finite data, got ({x}, {r}, {theta})")
            })?;
            Ok((0.0, [x, r, theta]))
        }
    }
}

/// Integrates the profile ODE from `init` until `s_max`, an axis approach or
/// curvature blow-up.
pub fn shoot_profile(n: usize, mode: SolitonMode, init: ShootInit, ds: f64, s_max: f64) -> Result<ShotProfile> {
    ensure(n >= 1, || format!("dimension n must be >= 1, got {n}"))?;
    ensure(ds > 0.0 && ds <= 1e-2, || format!("step ds must lie in (0, 1e-2], got {ds}"))?;
    ensure(s_max > 0.0, || format!("s_max must be positive, got {s_max}"))?;
    let sigma = mode.sigma();
    let (mut s, mut st) = initial_state(n, sigma, init, ds)?;
    let mut points = vec![point(s, &st)];
    let mut max_err: f64 = 0.0;
    let mut step = 0usize;
    let termination = loop {
        if s + ds > s_max + 1e-12 {
            break Termination::ArcLength;
        }
        if st[1] < ds && st[2].sin() < 0.0 {
            break Termination::Axis;
        }
        let curv = rhs(n, sigma, &st)[2];
        if !curv.is_finite() || curv.abs() > BLOWUP_CURVATURE {
            break Termination::BlowUp;
        }
        if step % DOUBLING_INTERVAL == 0 {
            let e = doubling_error(n, sigma, &st, ds);
            max_err = max_err.max(e);
            if !(e <= DOUBLING_TOL) {
                return Err(Error::numerical(format!(
                    "step-size instability at s = {s:.6}: step-doubling discrepancy {e:.3e} exceeds {DOUBLING_TOL:.1e}; \
                     reduce ds (currently {ds})"
                )));
            }
        }
        let next = rk4(n, sigma, &st, ds);
        if next[1] <= 0.0 {
            break Termination::Axis;
        }
        st = next;
        s += ds;
        step += 1;
        points.push(point(s, &st));
    };
    Ok(ShotProfile { points, termination, max_step_error: max_err })
}

// ---------------------------------------------------------------------------
// tori

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusConfig {
    /// Integration step used for the closure defect.
    pub ds: f64,
    /// Maximal arclength of the half loop.
    pub s_max: f64,
    /// Number of nodes of the output profile (even).
    pub m: usize,
    pub max_bisections: usize,
}

impl Default for TorusConfig {
    fn default() -> Self {
        TorusConfig { ds: 1e-3, s_max: 40.0, m: 1200, max_bisections: 200 }
    }
}

/// Half loop from the outer crossing `(0, r0)` (moving in -x) to the next
/// crossing of `x = 0`. Returns the crossing state and its arclength.
fn half_loop(n: usize, r0: f64, ds: f64, s_max: f64) -> Result<Option<(State, f64)>> {
    let sigma = 1.0;
    let mut st: State = [0.0, r0, PI];
    let mut s = 0.0;
    let mut step = 0usize;
    while s < s_max {
        if st[1] < ds && st[2].sin() < 0.0 {
            return Ok(None);
        }
        if !rhs(n, sigma, &st)[2].is_finite() || rhs(n, sigma, &st)[2].abs() > BLOWUP_CURVATURE {
            return Ok(None);
        }
        if step % DOUBLING_INTERVAL == 0 && !(doubling_error(n, sigma, &st, ds) <= DOUBLING_TOL) {
            return Err(Error::numerical(format!("step-size instability while shooting from r0 = {r0}")));
        }
        let next = rk4(n, sigma, &st, ds);
        step += 1;
        if next[1] <= 0.0 {
            return Ok(None);
        }
        if step > 1 && next[0] >= 0.0 {
            // land on x = 0 with a couple of Newton-like partial steps
            let mut cur = st;
            let mut sc = s;
            for _ in 0..3 {
                let cs = cur[2].cos();
                if cs.abs() < 1e-12 {
                    break;
                }
                let h = -cur[0] / cs;
                cur = rk4(n, sigma, &cur, h);
                sc += h;
            }
            return Ok(Some((cur, sc)));
        }
        st = next;
        s += ds;
    }
    Ok(None)
}

/// Signed closure defect of the orbit through `(0, r0)`: tangent angle at
/// the return crossing of `x = 0` minus the angle of the mirror-symmetric
/// closing orbit. `None` if the orbit never returns.
pub fn torus_closure_defect(n: usize, r0: f64, ds: f64, s_max: f64) -> Result<Option<f64>> {
    ensure(r0 > 0.0, || format!("r0 must be positive, got {r0}"))?;
    Ok(half_loop(n, r0, ds, s_max)?.map(|(st, _)| st[2] - 2.0 * PI))
}

/// Closure defects on a grid of starting radii; failed shots give `None`.
pub fn scan_torus_defects(
    n: usize,
    r0s: &[f64],
    ds: f64,
    s_max: f64,
    par: Parallelism,
) -> Vec<Option<f64>> {
    map_slice(par, r0s, |&r0| torus_closure_defect(n, r0, ds, s_max).ok().flatten())
}

/// Bisects the closure defect on `[r_lo, r_hi]` and assembles the closed,
/// mirror-symmetric torus profile at `config.m` nodes. The residual of the
/// assembled profile must not exceed `tol`.
pub fn find_torus(n: usize, bracket: [f64; 2], tol: f64, config: &TorusConfig) -> Result<SymmetricSoliton> {
    ensure(n >= 1, || format!("dimension n must be >= 1, got {n}"))?;
    let [mut lo, mut hi] = bracket;
    ensure(0.0 < lo && lo < hi, || format!("bracket must satisfy 0 < r_lo < r_hi, got [{lo}, {hi}]"))?;
    ensure(config.m >= 16 && config.m % 2 == 0, || format!("torus node count must be even and >= 16, got {}", config.m))?;
    ensure(tol > 0.0, || format!("tolerance must be positive, got {tol}"))?;
    let defect = |r0: f64| torus_closure_defect(n, r0, config.ds, config.s_max);
    let (dlo, dhi) = match (defect(lo)?, defect(hi)?) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::SearchFailure(format!(
                "bracket [{lo}, {hi}] has an endpoint whose orbit never returns to x = 0"
            )))
        }
    };
    if dlo.signum() == dhi.signum() {
        return Err(Error::SearchFailure(format!(
            "bracket [{lo}, {hi}] does not straddle a closed orbit (defects {dlo:.3e}, {dhi:.3e})"
        )));
    }
    let mut flo = dlo;
    for _ in 0..config.max_bisections {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = defect(mid)?.ok_or_else(|| {
            Error::SearchFailure(format!("orbit from r0 = {mid} does not return inside the bracket"))
        })?;
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let r0 = 0.5 * (lo + hi);
    let (end, half_len) = half_loop(n, r0, config.ds, config.s_max)?
        .ok_or_else(|| Error::SearchFailure(format!("orbit from r0 = {r0} does not return")))?;
    let final_defect = end[2] - 2.0 * PI;
    if final_defect.abs() > 1e-6 {
        return Err(Error::SearchFailure(format!(
            "bisection ended with closure defect {final_defect:.3e}; the bracket straddles a discontinuity, not a closed orbit"
        )));
    }

    // re-integrate the half loop onto the node grid
    let m = config.m;
    let half = m / 2;
    let node_ds = half_len / half as f64;
    let sub = (node_ds / config.ds).ceil().max(1.0) as usize;
    let h = node_ds / sub as f64;
    let mut st: State = [0.0, r0, PI];
    let mut pts = vec![point(0.0, &st)];
    for j in 1..=half {
        for _ in 0..sub {
            st = rk4(n, 1.0, &st, h);
        }
        pts.push(point(j as f64 * node_ds, &st));
    }
    pts[half].x = 0.0;
    for j in half + 1..m {
        let p = pts[m - j];
        pts.push(ProfilePoint { s: j as f64 * node_ds, x: -p.x, r: p.r, theta: 4.0 * PI - p.theta });
    }
    let torus = SymmetricSoliton::from_points(SolitonKind::Torus, n, pts, Topology::Periodic, Orientation::Right)?;
    let res = torus.residual_sup(SolitonMode::Shrinker);
    if res > tol {
        return Err(Error::numerical(format!(
            "torus residual {res:.3e} exceeds tolerance {tol:.3e} at m = {m}; increase m"
        )));
    }
    Ok(torus)
}

// ---------------------------------------------------------------------------
// conical ends

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub cone_slope: f64,
    /// Least-squares slope of `log|w|` against `log rho`.
    pub slope_w: f64,
    /// Least-squares slope of `log|w'|` against `log rho`.
    pub slope_dw: f64,
    /// Cone-coordinate window of the fit.
    pub fit_window: [f64; 2],
    pub fit_points: usize,
    pub ds: f64,
}

#[derive(Debug, Clone)]
pub struct ConicalEnd {
    pub profile: SymmetricSoliton,
    pub report: DecayReport,
    /// Cone coordinate, normal offset `w` and `dw/drho` per node.
    pub rho: Vec<f64>,
    pub w: Vec<f64>,
    pub dw: Vec<f64>,
}

/// Shrinker end asymptotic to the cone `r = a x`, on distances `[r0, r1]`
/// from the origin. The solution is started at `r1` from the two-term
/// asymptotic expansion `r = a x + (n-1) / (a x)` and integrated inwards.
pub fn conical_end(n: usize, cone_slope: f64, r0: f64, r1: f64, ds: f64) -> Result<ConicalEnd> {
    ensure(n >= 2, || format!("conical ends need n >= 2, got {n}"))?;
    ensure(cone_slope > 0.0, || format!("cone slope must be positive, got {cone_slope}"))?;
    ensure(0.0 < r0 && r0 < r1, || format!("radii must satisfy 0 < r0 < r1, got r0 = {r0}, r1 = {r1}"))?;
    ensure(ds > 0.0 && ds <= 1e-2, || format!("step ds must lie in (0, 1e-2], got {ds}"))?;
    let a = cone_slope;
    let b = (n as f64 - 1.0) / a;
    let norm_a = (1.0 + a * a).sqrt();
    // start: |(x, a x + b/x)| = r1
    let mut x1 = r1 / norm_a;
    for _ in 0..50 {
        let f = a * x1 + b / x1;
        let g = (x1 * x1 + f * f).sqrt() - r1;
        let dg = (x1 + f * (a - b / (x1 * x1))) / (x1 * x1 + f * f).sqrt();
        x1 -= g / dg;
    }
    let slope = a - b / (x1 * x1);
    // travel towards the origin: direction (-1, -f')
    let mut st: State = [x1, a * x1 + b / x1, PI + slope.atan()];
    let mut pts = vec![st];
    let mut step = 0usize;
    while (st[0] * st[0] + st[1] * st[1]).sqrt() > r0 {
        if step % DOUBLING_INTERVAL == 0 && !(doubling_error(n, 1.0, &st, ds) <= DOUBLING_TOL) {
            return Err(Error::numerical(format!("step-size instability on the conical end at step {step}")));
        }
        st = rk4(n, 1.0, &st, ds);
        step += 1;
        let (sn, cs) = st[2].sin_cos();
        let transversal = -(cs + a * sn);
        if !(transversal > 0.0) || st[1] <= 0.0 || step > 100_000_000 {
            return Err(Error::numerical(format!(
                "solution left the graphical neighbourhood of the cone at (x, r) = ({:.4}, {:.4})",
                st[0], st[1]
            )));
        }
        pts.push(st);
    }
    pts.reverse();
    let mut rho = Vec::with_capacity(pts.len());
    let mut w = Vec::with_capacity(pts.len());
    let mut dw = Vec::with_capacity(pts.len());
    for p in &pts {
        let (sn, cs) = p[2].sin_cos();
        rho.push((p[0] + a * p[1]) / norm_a);
        w.push((p[1] - a * p[0]) / norm_a);
        dw.push((sn - a * cs) / (cs + a * sn));
    }
    let lo = 0.5 * (rho[0] + rho[rho.len() - 1]);
    let hi = rho[rho.len() - 1];
    let idx: Vec<usize> = (0..rho.len()).filter(|&i| rho[i] >= lo).collect();
    let lr: Vec<f64> = idx.iter().map(|&i| rho[i].ln()).collect();
    let lw: Vec<f64> = idx.iter().map(|&i| w[i].abs().ln()).collect();
    let ldw: Vec<f64> = idx.iter().map(|&i| dw[i].abs().ln()).collect();
    if lw.iter().chain(&ldw).any(|v| !v.is_finite()) {
        return Err(Error::numerical("normal graph over the cone vanishes inside the fit window"));
    }
    let report = DecayReport {
        cone_slope: a,
        slope_w: crate::stats::ls_slope(&lr, &lw),
        slope_dw: crate::stats::ls_slope(&lr, &ldw),
        fit_window: [lo, hi],
        fit_points: idx.len(),
        ds,
    };
    // reverse order again: the stored profile runs outwards (+x) from r0
    let points: Vec<ProfilePoint> = pts
        .iter()
        .scan(0.0, |s, p| {
            let out = point(*s, p);
            *s += ds;
            Some(ProfilePoint { theta: p[2] - PI, ..out })
        })
        .collect();
    let profile = SymmetricSoliton::from_points(SolitonKind::ConicalEnd, n, points, Topology::OPEN, Orientation::Right)?;
    Ok(ConicalEnd { profile, report, rho, w, dw })
}

// ---------------------------------------------------------------------------
// expanders

/// Angle between the final tangent line and the axis, in `[0, pi/2]`.
fn axis_angle(theta: f64) -> f64 {
    let (sn, cs) = theta.sin_cos();
    sn.abs().atan2(cs.abs())
}

/// Rotationally symmetric expander leaving the axis perpendicularly, with
/// the axis point chosen by bisection so that the tangent at arclength
/// `s_max` makes slope `cone_slope` with the axis.
pub fn find_expander(n: usize, cone_slope: f64, ds: f64, s_max: f64) -> Result<SymmetricSoliton> {
    ensure(cone_slope > 0.0, || format!("cone slope must be positive, got {cone_slope}"))?;
    let target = cone_slope.atan();
    let shoot = |x0: f64| shoot_profile(n, SolitonMode::Expander, ShootInit::Axis { x0 }, ds, s_max);
    let angle = |x0: f64| -> Result<f64> {
        let p = shoot(x0)?;
        if p.termination != Termination::ArcLength {
            return Err(Error::SearchFailure(format!("expander shot from x0 = {x0} ended early ({:?})", p.termination)));
        }
        Ok(axis_angle(p.points.last().expect("non-empty").theta) - target)
    };
    // near x0 = 0 the expander is the plane (angle pi/2); grow x0 until the cone closes below the target
    let mut lo = 0.0;
    let mut hi = 0.5;
    let mut fhi = angle(hi)?;
    while fhi > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::SearchFailure(format!("no expander with cone slope {cone_slope} found")));
        }
        fhi = angle(hi)?;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if angle(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let shot = shoot(0.5 * (lo + hi))?;
    SymmetricSoliton::from_points(
        SolitonKind::Custom,
        n,
        shot.points,
        Topology::Ends { start: EndKind::Axis, end: EndKind::Free },
        Orientation::Right,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_is_an_orbit() {
        let shot = shoot_profile(2, SolitonMode::Shrinker, ShootInit::Point { x: 0.0, r: 2.0, theta: PI }, 1e-3, 10.0).unwrap();
        assert_eq!(shot.termination, Termination::Axis);
        let dev = shot.points.iter().map(|p| (p.x.hypot(p.r) - 2.0).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-6, "{dev}");
    }

    #[test]
    fn cylinder_is_an_orbit() {
        let r = 2f64.sqrt();
        let shot = shoot_profile(2, SolitonMode::Shrinker, ShootInit::Point { x: 0.0, r, theta: 0.0 }, 1e-3, 3.0).unwrap();
        assert_eq!(shot.termination, Termination::ArcLength);
        assert!(shot.points.iter().all(|p| (p.r - r).abs() < 1e-8));
    }

    #[test]
    fn axis_series_matches_sphere() {
        let shot = shoot_profile(2, SolitonMode::Shrinker, ShootInit::Axis { x0: 2.0 }, 1e-3, 20.0).unwrap();
        assert_eq!(shot.termination, Termination::Axis);
        let dev = shot.points.iter().map(|p| (p.x.hypot(p.r) - 2.0).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-8, "{dev}");
    }

    #[test]
    fn validation() {
        let init = ShootInit::Point { x: 0.0, r: 1.0, theta: 0.0 };
        assert!(matches!(shoot_profile(2, SolitonMode::Shrinker, init, 0.1, 1.0), Err(Error::Validation(_))));
        assert!(matches!(conical_end(2, 1.0, 50.0, 5.0, 1e-3), Err(Error::Validation(_))));
    }
}
