//! Backward heat kernels, Gaussian densities, F-area and entropy for
//! rotationally symmetric surfaces.
//!
//! Centers are restricted to the symmetry axis: `x_0 = (a, 0, ..., 0)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::audit::AuditReport;
use crate::error::{ensure, Result};
use crate::flow::{FlowBase, TimeMap, Trajectory};
use crate::parallel::{map_range, Parallelism};
use crate::soliton::{build_round_sphere, unit_sphere_area, SolitonKind, SymmetricSoliton};
use crate::spectrum::WeightedGrid;

pub const OFF_AXIS_LIMITATION: &str = "centers restricted to the symmetry axis";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacetimePoint {
    /// Axial coordinate of `x_0`.
    pub axial: f64,
    pub t0: f64,
}

impl SpacetimePoint {
    pub const ORIGIN: SpacetimePoint = SpacetimePoint { axial: 0.0, t0: 0.0 };
}

fn kernel(n: usize, dist2: f64, dt: f64) -> f64 {
    (4.0 * PI * dt).powf(-(n as f64) / 2.0) * (-dist2 / (4.0 * dt)).exp()
}

/// `ρ_{X_0}(x, t)` for an `n`-dimensional flow; `x` has `n + 1` coordinates,
/// the first one axial.
pub fn backward_kernel(p: &SpacetimePoint, x: &[f64], t: f64) -> Result<f64> {
    ensure(x.len() >= 2, || format!("points need at least 2 coordinates, got {}", x.len()))?;
    ensure(t < p.t0, || format!("kernel needs t < t0, got t = {t}, t0 = {}", p.t0))?;
    let d2 = (x[0] - p.axial).powi(2) + x[1..].iter().map(|v| v * v).sum::<f64>();
    Ok(kernel(x.len() - 1, d2, p.t0 - t))
}

/// `∫_S ρ_{X_0}(·, t) dμ`, integrating exactly over the rotation.
fn gaussian_integral(s: &SymmetricSoliton, p: &SpacetimePoint, t: f64) -> f64 {
    let n = s.n;
    let area = unit_sphere_area(n - 1);
    let dt = p.t0 - t;
    s.points
        .iter()
        .zip(&s.cell)
        .map(|(q, c)| {
            let d2 = (q.x - p.axial).powi(2) + q.r * q.r;
            area * q.r.powi(n as i32 - 1) * c * kernel(n, d2, dt)
        })
        .sum()
}

/// `F(S) = (4π)^{-n/2} ∫_S e^{-|x|^2/4}`.
pub fn f_area(s: &SymmetricSoliton) -> f64 {
    WeightedGrid::new(s).mass()
}

#[derive(Debug, Clone)]
pub struct FlowSlice {
    pub t: f64,
    pub surface: SymmetricSoliton,
}

/// Time slices of a flow, sorted by time.
#[derive(Debug, Clone)]
pub struct SurfaceFlow {
    pub slices: Vec<FlowSlice>,
}

fn scaled(s: &SymmetricSoliton, f: f64) -> Result<SymmetricSoliton> {
    let pos: Vec<[f64; 2]> = s.points.iter().map(|p| [f * p.x, f * p.r]).collect();
    SymmetricSoliton::from_positions(s.kind, s.n, &pos, s.topology, s.orientation)
}

impl SurfaceFlow {
    pub fn new(mut slices: Vec<FlowSlice>) -> Result<Self> {
        ensure(!slices.is_empty(), || "a flow needs at least one slice".into())?;
        slices.sort_by(|a, b| a.t.total_cmp(&b.t));
        ensure(slices.windows(2).all(|w| w[1].t > w[0].t), || "slice times must be distinct".into())?;
        Ok(SurfaceFlow { slices })
    }

    /// `t ↦ sqrt(-t) S`.
    pub fn self_similar(s: &SymmetricSoliton, times: &[f64]) -> Result<Self> {
        ensure(times.iter().all(|t| *t < 0.0), || "self-similar slices need t < 0".into())?;
        let slices =
            times.iter().map(|&t| Ok(FlowSlice { t, surface: scaled(s, (-t).sqrt())? })).collect::<Result<_>>()?;
        SurfaceFlow::new(slices)
    }

    /// Round spheres with `R(t)^2 = c - 2 n t`; `c = 0` is the self-similar flow.
    pub fn round_spheres(n: usize, c: f64, times: &[f64], m: usize) -> Result<Self> {
        let slices = times
            .iter()
            .map(|&t| {
                let r2 = c - 2.0 * n as f64 * t;
                ensure(r2 > 0.0, || format!("sphere has vanished at t = {t}"))?;
                Ok(FlowSlice { t, surface: build_round_sphere(n, r2.sqrt(), m)? })
            })
            .collect::<Result<_>>()?;
        SurfaceFlow::new(slices)
    }

    /// The same surface at every time (a static flow, such as a plane).
    pub fn stationary(s: &SymmetricSoliton, times: &[f64]) -> Result<Self> {
        SurfaceFlow::new(times.iter().map(|&t| FlowSlice { t, surface: s.clone() }).collect())
    }

    /// Unrescaled slices `M(t) = sqrt(-t) graph(u(τ))` of a rescaled trajectory.
    pub fn from_trajectory(traj: &Trajectory, base: &FlowBase, map: TimeMap) -> Result<Self> {
        traj.check_base(base)?;
        let slices = traj
            .states
            .iter()
            .map(|st| {
                let t = map.t(st.tau);
                let (g, _) = base.normal_graph(&st.u)?;
                Ok(FlowSlice { t, surface: scaled(&g, (-t).sqrt())? })
            })
            .collect::<Result<_>>()?;
        SurfaceFlow::new(slices)
    }

    pub fn slice_at(&self, t: f64) -> Result<&FlowSlice> {
        let tol = 1e-12 * t.abs().max(1.0);
        self.slices
            .iter()
            .find(|s| (s.t - t).abs() <= tol)
            .ok_or_else(|| crate::Error::validation(format!("flow has no slice at t = {t}")))
    }
}

/// `Θ(X_0, r) = ∫ ρ_{X_0}(·, t_0 - r^2) dμ_{t_0 - r^2}`.
pub fn density_ratio(flow: &SurfaceFlow, p: &SpacetimePoint, r: f64) -> Result<f64> {
    ensure(r > 0.0, || format!("scale r must be positive, got {r}"))?;
    let t = p.t0 - r * r;
    let slice = flow.slice_at(t)?;
    Ok(gaussian_integral(&slice.surface, p, t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntropySearch {
    /// Half-width of the axial grid; `None` uses the surface's axial extent.
    pub x0_range: Option<f64>,
    pub n_x0: usize,
    pub t0_min: f64,
    pub t0_max: f64,
    pub n_t0: usize,
    pub rounds: usize,
    pub golden_iters: usize,
    /// Grids whose relative spread is below this are reported flat.
    pub flat_tol: f64,
    pub parallelism: Parallelism,
}

impl Default for EntropySearch {
    fn default() -> Self {
        EntropySearch {
            x0_range: None,
            n_x0: 41,
            t0_min: 1e-2,
            t0_max: 1e2,
            n_t0: 41,
            rounds: 3,
            golden_iters: 60,
            flat_tol: 1e-9,
            parallelism: Parallelism::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyResult {
    pub value: f64,
    pub x0: f64,
    pub t0: f64,
    /// `(x0, t0, value)` after each coordinate refinement.
    pub refinement_history: Vec<[f64; 3]>,
    pub grid_cell: [f64; 2],
    pub flat: bool,
    pub limitation: String,
}

/// `F_{x0,t0}(S) = ∫_S ρ_{(x0, t0)}(·, 0) dμ`.
pub fn gaussian_area(s: &SymmetricSoliton, x0: f64, t0: f64) -> f64 {
    gaussian_integral(s, &SpacetimePoint { axial: x0, t0 }, 0.0)
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Entropy by an axial-center × log-scale grid search followed by rounds of
/// coordinate golden-section refinement.
pub fn entropy(s: &SymmetricSoliton, search: &EntropySearch) -> Result<EntropyResult> {
    ensure(search.n_x0 >= 2 && search.n_t0 >= 2, || "search grids need at least 2 points".into())?;
    ensure(search.t0_min > 0.0 && search.t0_max > search.t0_min, || "need 0 < t0_min < t0_max".into())?;
    let xr = search.x0_range.unwrap_or_else(|| s.points.iter().map(|p| p.x.abs()).fold(0.0, f64::max));
    ensure(xr >= 0.0 && xr.is_finite(), || format!("invalid axial range {xr}"))?;
    let dx = if xr > 0.0 { 2.0 * xr / (search.n_x0 - 1) as f64 } else { 0.0 };
    let (l0, l1) = (search.t0_min.ln(), search.t0_max.ln());
    let dl = (l1 - l0) / (search.n_t0 - 1) as f64;
    let nx = if xr > 0.0 { search.n_x0 } else { 1 };
    let vals = map_range(search.parallelism, nx * search.n_t0, |k| {
        let (i, j) = (k / search.n_t0, k % search.n_t0);
        let x0 = -xr + i as f64 * dx;
        let t0 = (l0 + j as f64 * dl).exp();
        (x0, t0, gaussian_area(s, x0, t0))
    });
    let (mut x, mut t, mut best) = vals.iter().copied().fold((0.0, 1.0, f64::NEG_INFINITY), |a, v| if v.2 > a.2 { v } else { a });
    let lo = vals.iter().map(|v| v.2).fold(f64::INFINITY, f64::min);
    let flat = (best - lo) <= search.flat_tol * best.abs().max(1e-300);
    let mut history = vec![[x, t, best]];
    let (mut wx, mut wl) = (dx, dl);
    for _ in 0..search.rounds {
        if wx > 0.0 {
            let (xn, v) = golden_max(|xx| gaussian_area(s, xx, t), x - wx, x + wx, search.golden_iters);
            if v >= best {
                x = xn;
                best = v;
            }
            history.push([x, t, best]);
        }
        let lt = t.ln();
        let (ln, v) = golden_max(|ll| gaussian_area(s, x, ll.exp()), lt - wl, lt + wl, search.golden_iters);
        if v >= best {
            t = ln.exp();
            best = v;
        }
        history.push([x, t, best]);
        wx /= 4.0;
        wl /= 4.0;
    }
    Ok(EntropyResult {
        value: best,
        x0: x,
        t0: t,
        refinement_history: history,
        grid_cell: [dx, dl],
        flat,
        limitation: OFF_AXIS_LIMITATION.into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HuiskenOptions {
    /// Absolute per-step slack.
    pub slack: f64,
    /// Multiplier on the per-step discretization estimate `dt |D_{k+1} - D_k|`.
    pub disc_factor: f64,
}

impl Default for HuiskenOptions {
    fn default() -> Self {
        HuiskenOptions { slack: 1e-6, disc_factor: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HuiskenRow {
    pub t: f64,
    pub r: f64,
    pub theta: f64,
    /// `∫ |H - <x - x0, ν> / (2 (t0 - t))|^2 ρ dμ`
    pub dissipation: f64,
    /// `sup |H - <x - x0, ν> / (2 (t0 - t))|^2`
    pub integrand_sup: f64,
}

fn dissipation(s: &SymmetricSoliton, p: &SpacetimePoint, t: f64) -> (f64, f64) {
    let n = s.n;
    let area = unit_sphere_area(n - 1);
    let dt = p.t0 - t;
    let mut total = 0.0;
    let mut sup = 0.0f64;
    for (i, q) in s.points.iter().enumerate() {
        let xn = (q.x - p.axial) * s.nu[i][0] + q.r * s.nu[i][1];
        let w = (s.h[i] - xn / (2.0 * dt)).powi(2);
        let d2 = (q.x - p.axial).powi(2) + q.r * q.r;
        total += w * area * q.r.powi(n as i32 - 1) * s.cell[i] * kernel(n, d2, dt);
        sup = sup.max(w);
    }
    (total, sup)
}

/// Gaussian-density table of a flow at `X_0` over the slices before `t0`.
pub fn huisken_table(flow: &SurfaceFlow, p: &SpacetimePoint) -> Vec<HuiskenRow> {
    flow.slices
        .iter()
        .filter(|s| s.t < p.t0)
        .map(|s| {
            let (d, sup) = dissipation(&s.surface, p, s.t);
            HuiskenRow {
                t: s.t,
                r: (p.t0 - s.t).sqrt(),
                theta: gaussian_integral(&s.surface, p, s.t),
                dissipation: d,
                integrand_sup: sup,
            }
        })
        .collect()
}

/// Checks that the Gaussian integral is non-increasing in `t` and that its
/// decrease dominates the integrated dissipation.
pub fn huisken_audit(flow: &SurfaceFlow, p: &SpacetimePoint, opts: &HuiskenOptions) -> AuditReport {
    let rows = huisken_table(flow, p);
    if rows.len() < 2 {
        return AuditReport::not_applicable("huisken", "fewer than two slices before t0");
    }
    let mut rep = AuditReport::new("huisken");
    let mut max_increase = f64::NEG_INFINITY;
    let mut max_excess = f64::NEG_INFINITY;
    let mut worst_margin_mono = f64::INFINITY;
    let mut worst_margin_diss = f64::INFINITY;
    for w in rows.windows(2) {
        let dt = w[1].t - w[0].t;
        let disc = opts.disc_factor * dt * (w[1].dissipation - w[0].dissipation).abs();
        let allowed = opts.slack + disc;
        let inc = w[1].theta - w[0].theta;
        let excess = inc + 0.5 * dt * (w[0].dissipation + w[1].dissipation);
        max_increase = max_increase.max(inc);
        max_excess = max_excess.max(excess);
        worst_margin_mono = worst_margin_mono.min(allowed - inc);
        worst_margin_diss = worst_margin_diss.min(allowed - excess);
    }
    let sup = rows.iter().map(|r| r.integrand_sup).fold(0.0, f64::max);
    rep.constant("max_theta_increase", max_increase);
    rep.constant("max_dissipation_excess", max_excess);
    rep.constant("dissipation_integrand_sup", sup);
    rep.constant("theta_first", rows[0].theta);
    rep.constant("theta_last", rows[rows.len() - 1].theta);
    rep.check_ge("monotone_in_t", worst_margin_mono, 0.0);
    rep.check_ge("dissipation_inequality", worst_margin_diss, 0.0);
    rep.note(OFF_AXIS_LIMITATION);
    rep
}

/// `true` for surfaces whose entropy is attained at their own scale.
pub fn is_model_shrinker(s: &SymmetricSoliton) -> bool {
    matches!(s.kind, SolitonKind::Sphere | SolitonKind::Cylinder | SolitonKind::Torus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soliton::{build_cylinder, build_plane, build_sphere};
    use approx::assert_relative_eq;
    use std::f64::consts::E;

    #[test]
    fn kernel_values() {
        let o = SpacetimePoint::ORIGIN;
        assert_relative_eq!(backward_kernel(&o, &[0.0, 0.0, 0.0], -1.0).unwrap(), 1.0 / (4.0 * PI), epsilon = 1e-15);
        let x = [0.3, 0.4, -0.2];
        let l: f64 = 1.7;
        let a = backward_kernel(&o, &x.map(|v| l * v), -l * l * 0.8).unwrap();
        let b = backward_kernel(&o, &x, -0.8).unwrap();
        assert_relative_eq!(a, b / (l * l), max_relative = 1e-14);
        let y = [0.0, 2.0, 0.0];
        assert_relative_eq!(backward_kernel(&o, &y, -1.0).unwrap(), (-1f64).exp() / (4.0 * PI), max_relative = 1e-14);
        assert!(backward_kernel(&o, &y, 0.0).is_err());
    }

    #[test]
    fn kernel_integrates_to_one_on_planes() {
        let plane = build_plane(2, 0.0, 20.0, 10000).unwrap();
        let v = gaussian_integral(&plane, &SpacetimePoint { axial: 0.0, t0: 1.0 }, 0.0);
        assert_relative_eq!(v, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn f_areas() {
        assert_relative_eq!(f_area(&build_sphere(2, 1000).unwrap()), 4.0 / E, epsilon = 1e-6);
        assert_relative_eq!(f_area(&build_cylinder(2, 8.0, 400).unwrap()), (2.0 * PI / E).sqrt(), epsilon = 1e-4);
        assert_relative_eq!(f_area(&build_round_sphere(2, 1.0, 1000).unwrap()), (-0.25f64).exp(), epsilon = 1e-6);
    }

    #[test]
    fn self_similar_density_is_constant() {
        let s = build_sphere(2, 400).unwrap();
        let rs: Vec<f64> = (1..=10).map(|k| 0.1 * k as f64).collect();
        let ts: Vec<f64> = rs.iter().map(|r| -r * r).collect();
        let flow = SurfaceFlow::self_similar(&s, &ts).unwrap();
        for r in rs {
            assert_relative_eq!(density_ratio(&flow, &SpacetimePoint::ORIGIN, r).unwrap(), 4.0 / E, epsilon = 1e-4);
        }
        assert!(density_ratio(&flow, &SpacetimePoint::ORIGIN, 0.15).is_err());
    }

    #[test]
    fn far_center_and_plane() {
        let s = build_sphere(2, 400).unwrap();
        let flow = SurfaceFlow::self_similar(&s, &[-1.0]).unwrap();
        let far = SpacetimePoint { axial: 10.0, t0: 0.0 };
        assert!(density_ratio(&flow, &far, 1.0).unwrap() < 1e-6);
        let plane = build_plane(2, 0.0, 20.0, 10000).unwrap();
        let pf = SurfaceFlow::stationary(&plane, &[-1.0, -0.25]).unwrap();
        assert_relative_eq!(density_ratio(&pf, &SpacetimePoint::ORIGIN, 0.5).unwrap(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn sphere_entropy_at_own_scale() {
        let s = build_sphere(2, 400).unwrap();
        let e = entropy(&s, &EntropySearch { parallelism: Parallelism::Sequential, ..Default::default() }).unwrap();
        assert_relative_eq!(e.value, 4.0 / E, epsilon = 1e-6);
        assert!(e.x0.abs() <= e.grid_cell[0] && e.t0.ln().abs() <= e.grid_cell[1]);
        assert!(!e.flat);
    }

    #[test]
    fn huisken_equality_and_power() {
        let s = build_sphere(2, 400).unwrap();
        let ts: Vec<f64> = (0..=20).map(|k| -1.0 + 0.045 * k as f64).collect();
        let flow = SurfaceFlow::self_similar(&s, &ts).unwrap();
        let rep = huisken_audit(&flow, &SpacetimePoint::ORIGIN, &HuiskenOptions::default());
        assert!(rep.passed(), "{rep:?}");
        assert!(rep.constants["dissipation_integrand_sup"] < 1e-6);
        let pert = SurfaceFlow::round_spheres(2, 0.5, &ts, 400).unwrap();
        let rep = huisken_audit(&pert, &SpacetimePoint::ORIGIN, &HuiskenOptions::default());
        assert!(rep.passed(), "{rep:?}");
        assert!(rep.constants["max_theta_increase"] < 0.0);
        // reversed time: the spheres grow
        let rev: Vec<FlowSlice> =
            pert.slices.iter().map(|s| FlowSlice { t: -1.1 - s.t, surface: s.surface.clone() }).collect();
        let rev = SurfaceFlow::new(rev).unwrap();
        assert!(huisken_audit(&rev, &SpacetimePoint::ORIGIN, &HuiskenOptions::default()).failed());
    }
}
