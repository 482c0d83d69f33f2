//! Localized avoidance: the cutoff field `u_α`, the operator `K`, the
//! conformal distance `d_t` and a crossing probe for pairs of shrinkers.
//!
//! Sets are rotationally symmetric and described by their profile curves in
//! the meridian half-plane `(x, r)`; the field is centred on the axis, so
//! shortest paths can be taken inside one meridian half-plane.

use nalgebra::{DMatrix, SymmetricEigen};
use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use serde::{Deserialize, Serialize};

use crate::audit::AuditReport;
use crate::density::SurfaceFlow;
use crate::error::{ensure, Error, Result};
use crate::parallel::{map_slice, Parallelism};
use crate::soliton::{EndKind, SymmetricSoliton, Topology};

/// `u_α(x, t) = (R² − |x − x₀|² − (2n + α)(t − t₀))₊` with `x₀` on the axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformalField {
    pub n: usize,
    pub radius: f64,
    pub alpha: f64,
    /// Axial coordinate of the center.
    pub x0: f64,
    pub t0: f64,
}

impl ConformalField {
    pub fn new(n: usize, radius: f64, alpha: f64, x0: f64, t0: f64) -> Result<Self> {
        ensure(n >= 1, || format!("dimension n must be >= 1, got {n}"))?;
        ensure(radius > 0.0 && radius.is_finite(), || format!("radius must be positive, got {radius}"))?;
        ensure(alpha >= 0.0 && alpha.is_finite(), || format!("alpha must be >= 0, got {alpha}"))?;
        ensure(x0.is_finite() && t0.is_finite(), || "center and base time must be finite".into())?;
        Ok(ConformalField { n, radius, alpha, x0, t0 })
    }

    /// `2n + α`, minus the time derivative of `u_α` on its support.
    pub fn slope(&self) -> f64 {
        2.0 * self.n as f64 + self.alpha
    }

    /// Squared radius of the support ball at time `t` (negative once it has vanished).
    pub fn support_radius2(&self, t: f64) -> f64 {
        self.radius * self.radius - self.slope() * (t - self.t0)
    }

    pub fn support_radius(&self, t: f64) -> f64 {
        self.support_radius2(t).max(0.0).sqrt()
    }

    /// `u_α` at a point of `R^{n+1}` (coordinate 0 is the axis; missing
    /// coordinates are zero).
    pub fn value(&self, p: &[f64], t: f64) -> f64 {
        let d2 = (p[0] - self.x0).powi(2) + p[1..].iter().map(|v| v * v).sum::<f64>();
        (self.support_radius2(t) - d2).max(0.0)
    }

    /// `u_α` at `(x, r)` of the meridian half-plane.
    pub fn value_xr(&self, x: f64, r: f64, t: f64) -> f64 {
        self.value(&[x, r], t)
    }
}

/// Pointwise check of `∂_t u_α < K u_α` on the support, where `K u` is the
/// smallest trace of `D²u` over n-planes (the sum of the n smallest Hessian
/// eigenvalues). Derivatives are central differences on a `samples x
/// samples` grid of the meridian half-plane at three times; points whose
/// stencil leaves the support are skipped.
pub fn k_operator_check(field: &ConformalField, samples: usize) -> Result<AuditReport> {
    ensure(samples >= 2, || format!("need at least 2 samples per axis, got {samples}"))?;
    let n = field.n;
    let dim = n + 1;
    let h = 1e-3 * field.radius;
    let life = field.radius * field.radius / field.slope();
    let ht = 1e-3 * life;
    let span = 1.2 * field.radius;

    let mut report = AuditReport::new("k_operator");
    let (mut sampled, mut outside, mut edge) = (0usize, 0usize, 0usize);
    let mut max_gap = f64::NEG_INFINITY;
    let mut hess_defect: f64 = 0.0;
    for frac in [0.0, 0.3, 0.6] {
        let t = field.t0 + frac * life;
        for i in 0..samples {
            for j in 0..samples {
                let mut p = vec![0.0; dim];
                p[0] = field.x0 - span + 2.0 * span * i as f64 / (samples - 1) as f64;
                p[1] = span * j as f64 / (samples - 1) as f64;
                if field.value(&p, t) <= 0.0 {
                    outside += 1;
                    continue;
                }
                let mut inside = true;
                let mut u = |q: &[f64], s: f64| {
                    let v = field.value(q, s);
                    inside &= v > 0.0;
                    v
                };
                let shifted = |a: usize, da: f64, b: usize, db: f64| {
                    let mut q = p.clone();
                    q[a] += da;
                    q[b] += db;
                    q
                };
                let u0 = u(&p, t);
                let mut hess = DMatrix::<f64>::zeros(dim, dim);
                for a in 0..dim {
                    let up = u(&shifted(a, h, a, 0.0), t);
                    let um = u(&shifted(a, -h, a, 0.0), t);
                    hess[(a, a)] = (up - 2.0 * u0 + um) / (h * h);
                    for b in a + 1..dim {
                        let v = (u(&shifted(a, h, b, h), t) - u(&shifted(a, h, b, -h), t)
                            - u(&shifted(a, -h, b, h), t)
                            + u(&shifted(a, -h, b, -h), t))
                            / (4.0 * h * h);
                        hess[(a, b)] = v;
                        hess[(b, a)] = v;
                    }
                }
                let ut = (u(&p, t + ht) - u(&p, t - ht)) / (2.0 * ht);
                if !inside {
                    edge += 1;
                    continue;
                }
                sampled += 1;
                let mut eig: Vec<f64> = SymmetricEigen::new(hess).eigenvalues.iter().copied().collect();
                eig.sort_by(f64::total_cmp);
                hess_defect = eig.iter().fold(hess_defect, |m, e| m.max((e + 2.0).abs()));
                let k: f64 = eig[..n].iter().sum();
                max_gap = max_gap.max(ut - k);
            }
        }
    }
    report.constant("hessian_eigenvalue", -2.0);
    report.constant("k_value", -2.0 * n as f64);
    report.constant("dt_value", -field.slope());
    report.constant("sampled", sampled as f64);
    report.constant("skipped_outside", outside as f64);
    report.constant("skipped_boundary", edge as f64);
    report.check_ge("sampled_points", sampled as f64, 1.0);
    if sampled == 0 {
        return Ok(report);
    }
    report.constant("max_dt_minus_k", max_gap);
    report.check_le("hessian_defect", hess_defect, 1e-5);
    report.check_le("weak_inequality", max_gap, 1e-6);
    let symbolic = -field.slope() < -2.0 * n as f64;
    let strict = symbolic && max_gap + 1e-6 < 0.0;
    let detail = if field.alpha > 0.0 {
        String::new()
    } else {
        "alpha = 0: du/dt = Ku on the support, the inequality is not strict".to_string()
    };
    report.check_flag("strict_inequality", strict, detail.clone());
    if !detail.is_empty() {
        report.note(detail);
    }
    Ok(report)
}

type Pt = [f64; 2];
type Seg = (Pt, Pt);

fn sub(a: Pt, b: Pt) -> Pt {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: Pt, b: Pt) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn norm(a: Pt) -> f64 {
    dot(a, a).sqrt()
}

fn lerp(a: Pt, b: Pt, s: f64) -> Pt {
    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
}

/// Where an axis end meets the axis, from `x = x* + c r²` through the last two nodes.
fn axis_point(p1: Pt, p2: Pt) -> Pt {
    let den = p1[1] * p1[1] - p2[1] * p2[1];
    if den.abs() < 1e-300 {
        return [p1[0], 0.0];
    }
    let c = (p1[0] - p2[0]) / den;
    [p1[0] - c * p1[1] * p1[1], 0.0]
}

/// Profile polyline as segments, closed up for periodic profiles and
/// extended to the axis at axis ends.
fn profile_segments(s: &SymmetricSoliton) -> Vec<Seg> {
    let mut pts: Vec<Pt> = s.points.iter().map(|p| [p.x, p.r]).collect();
    let m = pts.len();
    if m == 0 {
        return Vec::new();
    }
    match s.topology {
        Topology::Periodic => pts.push(pts[0]),
        Topology::Ends { start, end } if m >= 2 => {
            if end == EndKind::Axis {
                pts.push(axis_point(pts[m - 1], pts[m - 2]));
            }
            if start == EndKind::Axis {
                pts.insert(0, axis_point(pts[0], pts[1]));
            }
        }
        Topology::Ends { .. } => {}
    }
    pts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Parts of the segments inside the closed ball `|p − c| <= rho`.
fn clip_to_ball(segs: &[Seg], c: Pt, rho: f64) -> Vec<Seg> {
    let mut out = Vec::new();
    for &(p, q) in segs {
        let d = sub(q, p);
        let f = sub(p, c);
        let aa = dot(d, d);
        if aa == 0.0 {
            if norm(f) <= rho {
                out.push((p, q));
            }
            continue;
        }
        let bb = 2.0 * dot(f, d);
        let cc = dot(f, f) - rho * rho;
        let disc = bb * bb - 4.0 * aa * cc;
        if disc < 0.0 {
            continue;
        }
        let sq = disc.sqrt();
        let s0 = ((-bb - sq) / (2.0 * aa)).max(0.0);
        let s1 = ((-bb + sq) / (2.0 * aa)).min(1.0);
        if s1 > s0 {
            out.push((lerp(p, q, s0), lerp(p, q, s1)));
        }
    }
    out
}

fn point_segment(p: Pt, s: Seg) -> (f64, Pt) {
    let d = sub(s.1, s.0);
    let aa = dot(d, d);
    let u = if aa > 0.0 { (dot(sub(p, s.0), d) / aa).clamp(0.0, 1.0) } else { 0.0 };
    let c = lerp(s.0, s.1, u);
    (norm(sub(p, c)), c)
}

/// Closest points of two segments.
fn segment_pair(a: Seg, b: Seg) -> (f64, Pt, Pt) {
    let (da, db) = (sub(a.1, a.0), sub(b.1, b.0));
    let den = da[0] * db[1] - da[1] * db[0];
    if den != 0.0 {
        let w = sub(b.0, a.0);
        let s = (w[0] * db[1] - w[1] * db[0]) / den;
        let u = (w[0] * da[1] - w[1] * da[0]) / den;
        if (0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&u) {
            let p = lerp(a.0, a.1, s);
            return (0.0, p, p);
        }
    }
    // no proper crossing: the minimum sits at an endpoint of one segment
    let mut best = (f64::INFINITY, a.0, b.0);
    for p in [a.0, a.1] {
        let (d, c) = point_segment(p, b);
        if d < best.0 {
            best = (d, p, c);
        }
    }
    for p in [b.0, b.1] {
        let (d, c) = point_segment(p, a);
        if d < best.0 {
            best = (d, c, p);
        }
    }
    best
}

fn bbox(s: Seg) -> [f64; 4] {
    [s.0[0].min(s.1[0]), s.0[0].max(s.1[0]), s.0[1].min(s.1[1]), s.0[1].max(s.1[1])]
}

#[derive(Debug, Clone, Copy)]
struct Gap {
    dist: f64,
    a: Pt,
    b: Pt,
}

fn min_gap(sa: &[Seg], sb: &[Seg]) -> Option<Gap> {
    let boxes: Vec<[f64; 4]> = sb.iter().map(|s| bbox(*s)).collect();
    let mut best: Option<Gap> = None;
    for &a in sa {
        let ba = bbox(a);
        for (&b, bb) in sb.iter().zip(&boxes) {
            if let Some(g) = best {
                let dx = (bb[0] - ba[1]).max(ba[0] - bb[1]).max(0.0);
                let dy = (bb[2] - ba[3]).max(ba[2] - bb[3]).max(0.0);
                if dx.hypot(dy) > g.dist {
                    continue;
                }
            }
            let (d, pa, pb) = segment_pair(a, b);
            if best.is_none_or(|g| d < g.dist) {
                best = Some(Gap { dist: d, a: pa, b: pb });
            }
        }
    }
    best
}

fn polyline_distance(p: Pt, segs: &[Seg]) -> f64 {
    segs.iter().map(|s| point_segment(p, *s).0).fold(f64::INFINITY, f64::min)
}

/// Whether every profile node lies at one distance from `c`; returns it.
fn concentric_radius(s: &SymmetricSoliton, c: Pt, tol: f64) -> Option<f64> {
    let first = norm(sub([s.points.first()?.x, s.points[0].r], c));
    s.points.iter().all(|p| (norm(sub([p.x, p.r], c)) - first).abs() <= tol).then_some(first)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMethod {
    /// One-dimensional quadrature along a ray from the center.
    Radial,
    /// Shortest path on a grid graph of the meridian half-plane.
    Grid,
    /// The sets meet inside the support.
    Contact,
    /// A set misses the support; the infimum over no paths is `+∞`.
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceOptions {
    /// Grid cells across the support radius on the coarse grid.
    pub cells: usize,
    /// Repeat the grid computation with half the spacing; the difference is
    /// reported as the error estimate.
    pub refine: bool,
    /// Use the grid even for concentric spheres.
    pub force_grid: bool,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        DistanceOptions { cells: 64, refine: true, force_grid: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformalDistance {
    pub value: f64,
    pub method: DistanceMethod,
    /// Coarse-grid value when the grid was refined.
    pub coarse: Option<f64>,
    pub error_estimate: Option<f64>,
}

impl ConformalDistance {
    fn exact(value: f64, method: DistanceMethod) -> Self {
        ConformalDistance { value, method, coarse: None, error_estimate: Some(0.0) }
    }
}

/// `∫_{s1}^{s2} ds / (ρ² − s²)` along a straight line through the center,
/// with `s` the signed offset from the center. `+∞` if the segment reaches
/// the edge of the support.
fn central_line_integral(rho: f64, s1: f64, s2: f64) -> f64 {
    let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
    if lo <= -rho || hi >= rho {
        return f64::INFINITY;
    }
    if lo == hi {
        return 0.0;
    }
    let out = quadrature::integrate(|s| 1.0 / (rho * rho - s * s), lo, hi, 1e-15);
    out.integral
}

/// `d_t` between the concentric spheres of radii `r1` and `r2` about the center.
pub fn radial_distance(field: &ConformalField, t: f64, r1: f64, r2: f64) -> f64 {
    central_line_integral(field.support_radius(t), r1.abs(), r2.abs())
}

/// `∫ ds / u` along the axis between the axial coordinates `x1` and `x2`.
pub fn axis_distance(field: &ConformalField, t: f64, x1: f64, x2: f64) -> f64 {
    central_line_integral(field.support_radius(t), x1 - field.x0, x2 - field.x0)
}

/// The conformal distance `d_t = inf ∫ u_α(γ, t)^{-1} ds` between two
/// rotationally symmetric sets. Paths may not leave `{u_α > 0}`.
pub fn conformal_distance(
    a: &SymmetricSoliton,
    b: &SymmetricSoliton,
    field: &ConformalField,
    t: f64,
    opts: &DistanceOptions,
) -> Result<ConformalDistance> {
    ensure(a.n == field.n && b.n == field.n, || {
        format!("dimension mismatch: sets have n = {}, {}; field has n = {}", a.n, b.n, field.n)
    })?;
    ensure(opts.cells >= 4, || format!("need at least 4 grid cells, got {}", opts.cells))?;
    let rho = field.support_radius(t);
    if rho <= 0.0 {
        return Ok(ConformalDistance::exact(f64::INFINITY, DistanceMethod::Empty));
    }
    let c = [field.x0, 0.0];
    let (full_a, full_b) = (profile_segments(a), profile_segments(b));
    let inner = rho * (1.0 - 1e-12);
    let (sa, sb) = (clip_to_ball(&full_a, c, inner), clip_to_ball(&full_b, c, inner));
    if sa.is_empty() || sb.is_empty() {
        return Ok(ConformalDistance::exact(f64::INFINITY, DistanceMethod::Empty));
    }
    let gap = min_gap(&sa, &sb).expect("both clipped sets are non-empty");
    if gap.dist <= 1e-12 * rho {
        return Ok(ConformalDistance::exact(0.0, DistanceMethod::Contact));
    }
    if !opts.force_grid {
        let tol = 1e-9 * rho;
        if let (Some(ra), Some(rb)) = (concentric_radius(a, c, tol), concentric_radius(b, c, tol)) {
            return Ok(ConformalDistance::exact(radial_distance(field, t, ra, rb), DistanceMethod::Radial));
        }
    }
    let coarse = grid_distance(&sa, &sb, field, t, opts.cells)?;
    if !opts.refine {
        return Ok(ConformalDistance { value: coarse, method: DistanceMethod::Grid, coarse: None, error_estimate: None });
    }
    let fine = grid_distance(&sa, &sb, field, t, 2 * opts.cells)?;
    Ok(ConformalDistance {
        value: fine,
        method: DistanceMethod::Grid,
        coarse: Some(coarse),
        error_estimate: Some((coarse - fine).abs()),
    })
}

fn densify(segs: &[Seg], step: f64) -> Vec<Pt> {
    let mut pts = Vec::new();
    for &(p, q) in segs {
        let k = (norm(sub(q, p)) / step).ceil().max(1.0) as usize;
        pts.extend((0..=k).map(|i| lerp(p, q, i as f64 / k as f64)));
    }
    pts
}

/// 8-connected grid over the upper half of the support disc, spacing
/// `ρ / cells`, with edge weight `length / u` at the edge midpoint. Set
/// points are attached to grid nodes within 1.5 cells.
fn grid_distance(sa: &[Seg], sb: &[Seg], field: &ConformalField, t: f64, cells: usize) -> Result<f64> {
    let rho = field.support_radius(t);
    let h = rho / cells as f64;
    let (nx, nr) = (2 * cells + 1, cells + 1);
    let xmin = field.x0 - rho;
    let node_xy = |i: usize, j: usize| [xmin + i as f64 * h, j as f64 * h];
    let u = |p: Pt| field.value_xr(p[0], p[1], t);
    let weight = |p: Pt, q: Pt| {
        let um = u(lerp(p, q, 0.5));
        (um > 0.0).then(|| norm(sub(q, p)) / um)
    };

    let mut g = UnGraph::<(), f64>::default();
    let mut ids: Vec<Option<NodeIndex>> = vec![None; nx * nr];
    for i in 0..nx {
        for j in 0..nr {
            if u(node_xy(i, j)) > 0.0 {
                ids[i * nr + j] = Some(g.add_node(()));
            }
        }
    }
    let id = |i: isize, j: isize| -> Option<NodeIndex> {
        if i < 0 || j < 0 || i as usize >= nx || j as usize >= nr {
            return None;
        }
        ids[i as usize * nr + j as usize]
    };
    for i in 0..nx as isize {
        for j in 0..nr as isize {
            let Some(a) = id(i, j) else { continue };
            for (di, dj) in [(1, 0), (0, 1), (1, 1), (1, -1)] {
                if let Some(b) = id(i + di, j + dj) {
                    let (p, q) = (node_xy(i as usize, j as usize), node_xy((i + di) as usize, (j + dj) as usize));
                    if let Some(w) = weight(p, q) {
                        g.add_edge(a, b, w);
                    }
                }
            }
        }
    }

    let attach = |g: &mut UnGraph<(), f64>, p: Pt| -> (NodeIndex, usize) {
        let node = g.add_node(());
        let (ci, cj) = (((p[0] - xmin) / h).floor() as isize, (p[1] / h).floor() as isize);
        let mut links = 0;
        for i in ci - 1..=ci + 2 {
            for j in cj - 1..=cj + 2 {
                if let Some(gn) = id(i, j) {
                    let q = node_xy(i as usize, j as usize);
                    if norm(sub(q, p)) <= 1.5 * h {
                        if let Some(w) = weight(p, q) {
                            g.add_edge(node, gn, w);
                            links += 1;
                        }
                    }
                }
            }
        }
        (node, links)
    };
    let hint = || {
        Error::numerical(format!(
            "grid with {cells} cells per support radius does not connect the sets at t = {t}; increase the cell count"
        ))
    };
    let source = g.add_node(());
    let mut linked = 0;
    for p in densify(sa, 0.5 * h) {
        let (node, links) = attach(&mut g, p);
        g.add_edge(source, node, 0.0);
        linked += links;
    }
    let mut targets = Vec::new();
    let mut linked_b = 0;
    for p in densify(sb, 0.5 * h) {
        let (node, links) = attach(&mut g, p);
        targets.push(node);
        linked_b += links;
    }
    if linked == 0 || linked_b == 0 {
        return Err(hint());
    }
    let dist = dijkstra(&g, source, None, |e| *e.weight());
    let d = targets.iter().filter_map(|n| dist.get(n)).copied().fold(f64::INFINITY, f64::min);
    if !d.is_finite() {
        return Err(hint());
    }
    Ok(d)
}

/// Comparison window: times `[a, b]`, field radius `R`, margin `γ` and axial center `x0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvoidanceWindow {
    pub a: f64,
    pub b: f64,
    pub radius: f64,
    pub gamma: f64,
    pub x0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvoidanceOptions {
    pub distance: DistanceOptions,
    pub tol: f64,
    pub parallelism: Parallelism,
}

impl Default for AvoidanceOptions {
    fn default() -> Self {
        AvoidanceOptions { distance: DistanceOptions::default(), tol: 1e-6, parallelism: Parallelism::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub t: f64,
    pub d: f64,
    pub method: DistanceMethod,
    pub error_estimate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvoidanceReport {
    pub window: AvoidanceWindow,
    pub rows: Vec<DistanceRow>,
    pub audit: AuditReport,
}

/// Checks that `t ↦ d_t(M(t), M'(t))` is non-decreasing on the common time
/// grid in `[a, b]` and that the flows do not meet at `t = b` inside
/// `B_{sqrt(R² − γ − 2n(b − a))}(x0)`. The field is `u_0` with `t0 = a`.
///
/// The hypothesis (disjointness inside `B_{sqrt(γ + R² − 2n(t − a))}(x0)`
/// for `t < b`) is verified on the data; a violation is a validation error.
pub fn avoidance_audit(
    flow_a: &SurfaceFlow,
    flow_b: &SurfaceFlow,
    window: &AvoidanceWindow,
    opts: &AvoidanceOptions,
) -> Result<AvoidanceReport> {
    let w = *window;
    ensure(w.a.is_finite() && w.b.is_finite() && w.a < w.b, || format!("need a < b, got [{}, {}]", w.a, w.b))?;
    ensure(w.radius > 0.0 && w.gamma > 0.0, || format!("need R > 0 and gamma > 0, got {} and {}", w.radius, w.gamma))?;
    let n = flow_a.slices[0].surface.n;
    ensure(flow_a.slices.iter().chain(&flow_b.slices).all(|s| s.surface.n == n), || {
        "both flows must have one surface dimension".into()
    })?;
    let nf = n as f64;
    let limit = w.a + (w.radius * w.radius - w.gamma) / (2.0 * nf);
    ensure(w.b < limit, || format!("window end b = {} must be below a + (R^2 - gamma)/(2n) = {limit}", w.b))?;

    let tt = 1e-12 * w.b.abs().max(w.a.abs()).max(1.0);
    let times: Vec<f64> = flow_a.slices.iter().map(|s| s.t).filter(|t| *t >= w.a - tt && *t <= w.b + tt).collect();
    ensure(times.len() >= 2, || format!("need at least two slices in [{}, {}], found {}", w.a, w.b, times.len()))?;
    let last = *times.last().unwrap();
    ensure((last - w.b).abs() <= tt, || format!("flows need a slice at t = b = {}", w.b))?;
    let pairs: Vec<(f64, &SymmetricSoliton, &SymmetricSoliton)> = times
        .iter()
        .map(|&t| Ok((t, &flow_a.slice_at(t)?.surface, &flow_b.slice_at(t)?.surface)))
        .collect::<Result<_>>()?;

    let c = [w.x0, 0.0];
    let contact = 1e-12 * w.radius;
    for &(t, sa, sb) in &pairs[..pairs.len() - 1] {
        let rho = (w.gamma + w.radius * w.radius - 2.0 * nf * (t - w.a)).sqrt();
        let gap = min_gap(&clip_to_ball(&profile_segments(sa), c, rho), &clip_to_ball(&profile_segments(sb), c, rho));
        if let Some(g) = gap {
            ensure(g.dist > contact, || {
                format!(
                    "hypothesis violated: the flows meet inside the ball of radius {rho} at t = {t} near ({}, {})",
                    g.a[0], g.a[1]
                )
            })?;
        }
    }

    let field = ConformalField::new(n, w.radius, 0.0, w.x0, w.a)?;
    let results = map_slice(opts.parallelism, &pairs, |&(t, sa, sb)| conformal_distance(sa, sb, &field, t, &opts.distance));
    let rows: Vec<DistanceRow> = results
        .into_iter()
        .zip(&times)
        .map(|(r, &t)| r.map(|d| DistanceRow { t, d: d.value, method: d.method, error_estimate: d.error_estimate }))
        .collect::<Result<_>>()?;

    let mut audit = AuditReport::new("avoidance");
    let mut worst = f64::NEG_INFINITY;
    for k in 0..rows.len() - 1 {
        let (d0, d1) = (rows[k].d, rows[k + 1].d);
        let drop = if d0.is_infinite() && d1.is_infinite() { 0.0 } else { d0 - d1 };
        let bound = rows[k].error_estimate.unwrap_or(0.0) + rows[k + 1].error_estimate.unwrap_or(0.0);
        worst = worst.max(drop - bound);
    }
    audit.constant("d_first", rows[0].d);
    audit.constant("d_last", rows[rows.len() - 1].d);
    audit.check_le("non_decreasing", worst, opts.tol);

    let rho_final = (w.radius * w.radius - w.gamma - 2.0 * nf * (w.b - w.a)).sqrt();
    let (_, sa, sb) = pairs[pairs.len() - 1];
    let final_gap = min_gap(&clip_to_ball(&profile_segments(sa), c, rho_final), &clip_to_ball(&profile_segments(sb), c, rho_final))
        .map_or(f64::INFINITY, |g| g.dist);
    audit.constant("final_ball_radius", rho_final);
    audit.check_gt("final_ball_gap", final_gap, contact);
    Ok(AvoidanceReport { window: w, rows, audit })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: f64,
    pub r: f64,
    #[serde(rename = "gapA")]
    pub gap_a: f64,
    #[serde(rename = "gapB")]
    pub gap_b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum FrankelOutcome {
    Intersection { witness: Witness, tol: f64 },
    /// No crossing: the smallest distance between the profiles and where it is attained.
    Gap { min_gap: f64, at_a: [f64; 2], at_b: [f64; 2], tol: f64 },
}

impl FrankelOutcome {
    pub fn witness(&self) -> Option<Witness> {
        match self {
            FrankelOutcome::Intersection { witness, .. } => Some(*witness),
            FrankelOutcome::Gap { .. } => None,
        }
    }
}

/// Searches the two profile curves for a common point.
pub fn frankel_probe(a: &SymmetricSoliton, b: &SymmetricSoliton) -> FrankelOutcome {
    let (sa, sb) = (profile_segments(a), profile_segments(b));
    let scale = sa
        .iter()
        .chain(&sb)
        .flat_map(|s| [s.0[0].abs(), s.0[1].abs(), s.1[0].abs(), s.1[1].abs()])
        .fold(1.0, f64::max);
    let tol = 1e-9 * scale;
    let Some(g) = min_gap(&sa, &sb) else {
        return FrankelOutcome::Gap { min_gap: f64::INFINITY, at_a: [f64::NAN; 2], at_b: [f64::NAN; 2], tol };
    };
    if g.dist <= tol {
        let p = lerp(g.a, g.b, 0.5);
        let witness = Witness { x: p[0], r: p[1], gap_a: polyline_distance(p, &sa), gap_b: polyline_distance(p, &sb) };
        FrankelOutcome::Intersection { witness, tol }
    } else {
        FrankelOutcome::Gap { min_gap: g.dist, at_a: g.a, at_b: g.b, tol }
    }
}
