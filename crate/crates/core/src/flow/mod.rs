//! Rescaled mean curvature flow of normal graphs over a shrinker.
//!
//! A graph `x = p + u ν` over the base moves by
//! `∂_τ u = v (-H + <x, ν>/2)` (evaluated on the graph), where `v` is the
//! ratio of normal speed to offset speed. Writing this as
//! `(∂_τ - L) u = E(u)` isolates the super-linear remainder `E`.
//!
//! The graph speed is evaluated from the 2-jet `(u, u', u'')` with exact
//! offset-curve formulas. The second derivative fed to it is
//! `Δ_w u - c u'`, where `Δ_w` is the finite-volume weighted Laplacian and
//! `c` the discrete drift, so that the linearization of the discrete speed
//! is exactly the discrete `L`.

mod simulate;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::soliton::{geometry, EndKind, Orientation, SymmetricSoliton, Topology};
use crate::spectrum::StabilityOperator;

pub use simulate::{
    shrinker_mean_convexity, simulate, step, GraphState, MeanConvexity, MeanConvexitySlice, NormRow, SimOptions, StopCause,
    TimeMap, Trajectory,
    TrajectorySummary,
};

/// Neighbour of a node in a derivative stencil.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Nb {
    Node(usize, f64),
    /// Mirror image of the node itself across the axis, at distance `2r`.
    Mirror(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Stencil {
    Central { prev: Nb, next: Nb },
    /// Free start: the two following nodes at distances `a < b`.
    Forward { a: f64, b: f64 },
    /// Free end: the two preceding nodes at distances `a < b`.
    Backward { a: f64, b: f64 },
}

/// Values `(f_-, h_-, f_+, h_+)` of a central stencil.
fn central_values(f: &[f64], i: usize, prev: Nb, next: Nb) -> (f64, f64, f64, f64) {
    let val = |nb: Nb| match nb {
        Nb::Node(j, h) => (f[j], h),
        Nb::Mirror(h) => (f[i], h),
    };
    let (fm, hm) = val(prev);
    let (fp, hp) = val(next);
    (fm, hm, fp, hp)
}

/// Base geometry of one node used by the graph speed.
#[derive(Debug, Clone, Copy, PartialEq)]
struct NodeGeom {
    p: [f64; 2],
    t: [f64; 2],
    nu: [f64; 2],
    kappa: f64,
    dkappa: f64,
}

/// Output of the graph speed at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphSpeed {
    /// `v (-H + <x, ν>/2)` on the graph.
    pub speed: f64,
    pub mean_curvature: f64,
    pub v: f64,
    pub xdotnu: f64,
}

/// A shrinker prepared for graph evolution: operator, derivative stencils
/// and base geometry.
#[derive(Debug, Clone)]
pub struct FlowBase {
    pub soliton: SymmetricSoliton,
    pub op: StabilityOperator,
    stencils: Vec<Stencil>,
    geom: Vec<NodeGeom>,
    /// Discrete drift `(n-1) T_r / r - <p, T>/2`, the coefficient of `u'` in `L`.
    pub drift: Vec<f64>,
    /// Graphicality threshold for `||u||_2^{(1)}`.
    pub eta_graph: f64,
    /// `F(0)` per node: the base speed, equal to minus the soliton residual.
    pub base_speed: Vec<f64>,
}

fn first_derivative(st: Stencil, f: &[f64], i: usize) -> f64 {
    match st {
        Stencil::Central { prev, next } => {
            let (fm, h1, fp, h2) = central_values(f, i, prev, next);
            (h1 * h1 * (fp - f[i]) + h2 * h2 * (f[i] - fm)) / (h1 * h2 * (h1 + h2))
        }
        Stencil::Forward { a, b } => {
            -(a + b) / (a * b) * f[i] + b / (a * (b - a)) * f[i + 1] - a / (b * (b - a)) * f[i + 2]
        }
        Stencil::Backward { a, b } => {
            (a + b) / (a * b) * f[i] - b / (a * (b - a)) * f[i - 1] + a / (b * (b - a)) * f[i - 2]
        }
    }
}

fn second_derivative(st: Stencil, f: &[f64], i: usize) -> f64 {
    match st {
        Stencil::Central { prev, next } => {
            let (fm, h1, fp, h2) = central_values(f, i, prev, next);
            2.0 * (h1 * fp - (h1 + h2) * f[i] + h2 * fm) / (h1 * h2 * (h1 + h2))
        }
        Stencil::Forward { a, b } => 2.0 * (f[i] / (a * b) - f[i + 1] / (a * (b - a)) + f[i + 2] / (b * (b - a))),
        Stencil::Backward { a, b } => 2.0 * (f[i] / (a * b) - f[i - 1] / (a * (b - a)) + f[i - 2] / (b * (b - a))),
    }
}

impl FlowBase {
    pub fn new(soliton: &SymmetricSoliton) -> Result<Self> {
        ensure(soliton.orientation == Orientation::Right, || "graph flows need the right-hand normal orientation".into())?;
        let s = soliton.clone();
        let op = StabilityOperator::new(&s)?;
        let m = s.len();
        let pos = s.positions();
        let dist = |i: usize, j: usize| geometry::norm(geometry::sub(pos[i], pos[j]));
        let mut stencils = Vec::with_capacity(m);
        for i in 0..m {
            let st = match s.topology {
                Topology::Periodic => {
                    let (a, b) = ((i + m - 1) % m, (i + 1) % m);
                    Stencil::Central { prev: Nb::Node(a, dist(i, a)), next: Nb::Node(b, dist(i, b)) }
                }
                Topology::Ends { start, end } => {
                    if i == 0 && start == EndKind::Free {
                        Stencil::Forward { a: dist(0, 1), b: dist(0, 1) + dist(1, 2) }
                    } else if i + 1 == m && end == EndKind::Free {
                        Stencil::Backward { a: dist(i, i - 1), b: dist(i, i - 1) + dist(i - 1, i - 2) }
                    } else {
                        let prev = if i == 0 { Nb::Mirror(2.0 * pos[0][1]) } else { Nb::Node(i - 1, dist(i, i - 1)) };
                        let next = if i + 1 == m { Nb::Mirror(2.0 * pos[i][1]) } else { Nb::Node(i + 1, dist(i, i + 1)) };
                        Stencil::Central { prev, next }
                    }
                }
            };
            stencils.push(st);
        }
        let dkappa: Vec<f64> = (0..m).map(|i| first_derivative(stencils[i], &s.kappa, i)).collect();
        let nm1 = (s.n - 1) as f64;
        let geom: Vec<NodeGeom> = (0..m)
            .map(|i| NodeGeom { p: pos[i], t: s.tangent[i], nu: s.nu[i], kappa: s.kappa[i], dkappa: dkappa[i] })
            .collect();
        let drift = geom.iter().map(|g| nm1 * g.t[1] / g.p[1] - 0.5 * geometry::dot(g.p, g.t)).collect();
        let eta_graph = 0.1 / s.max_principal_curvature();
        let mut base = FlowBase { soliton: s, op, stencils, geom, drift, eta_graph, base_speed: Vec::new() };
        base.base_speed = (0..m).map(|i| base.speed_at(i, 0.0, 0.0, 0.0).map(|g| g.speed)).collect::<Result<_>>()?;
        Ok(base)
    }

    pub fn len(&self) -> usize {
        self.soliton.len()
    }

    pub fn is_empty(&self) -> bool {
        self.soliton.is_empty()
    }

    pub fn n(&self) -> usize {
        self.soliton.n
    }

    pub fn is_interior(&self, i: usize) -> bool {
        self.op.grid.interior[i]
    }

    fn check_len(&self, u: &[f64]) -> Result<()> {
        ensure(u.len() == self.len(), || format!("graph function has {} values, base has {} nodes", u.len(), self.len()))
    }

    /// `u'` along the profile.
    pub fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_len(u)?;
        Ok((0..self.len()).map(|i| first_derivative(self.stencils[i], u, i)).collect())
    }

    /// Three-point `u''` along the profile.
    pub fn second_derivative(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_len(u)?;
        Ok((0..self.len()).map(|i| second_derivative(self.stencils[i], u, i)).collect())
    }

    /// `||u||_k^{(d)} = Σ_{i<=k} sup r̃^{-d+i} |∇^i u|`, with the Hessian norm
    /// `sqrt(u''^2 + (n-1) (r' u' / r)^2)`.
    pub fn weighted_norm(&self, u: &[f64], k: usize, d: f64) -> Result<f64> {
        ensure(k <= 2, || format!("norm order k must be at most 2, got {k}"))?;
        self.check_len(u)?;
        let rt = &self.soliton.rtilde;
        let sup = |vals: &[f64], pow: f64| -> f64 {
            vals.iter().zip(rt).map(|(v, r)| r.powf(pow) * v.abs()).fold(0.0, f64::max)
        };
        let mut total = sup(u, -d);
        if k >= 1 {
            let q = self.gradient(u)?;
            total += sup(&q, 1.0 - d);
            if k >= 2 {
                let upp = self.second_derivative(u)?;
                let nm1 = (self.n() - 1) as f64;
                let hess: Vec<f64> = (0..self.len())
                    .map(|i| {
                        let rot = self.geom[i].t[1] * q[i] / self.geom[i].p[1];
                        (upp[i] * upp[i] + nm1 * rot * rot).sqrt()
                    })
                    .collect();
                total += sup(&hess, 2.0 - d);
            }
        }
        Ok(total)
    }

    /// `||u||_2^{(1)}`, the graphicality measure.
    pub fn graph_norm(&self, u: &[f64]) -> Result<f64> {
        self.weighted_norm(u, 2, 1.0)
    }

    pub fn check_graphical(&self, u: &[f64]) -> Result<f64> {
        let g = self.graph_norm(u)?;
        if !(g <= self.eta_graph) {
            return Err(Error::validation(format!(
                "graphicality violated: ||u||_2^(1) = {g:.4e} exceeds eta_graph = {:.4e}",
                self.eta_graph
            )));
        }
        Ok(g)
    }

    /// Speed of the graph with local 2-jet `(z, q, a)` at node `i`.
    fn speed_at(&self, i: usize, z: f64, q: f64, a2nd: f64) -> Result<GraphSpeed> {
        let g = &self.geom[i];
        let a = 1.0 + z * g.kappa;
        if !(a > 0.0) {
            return Err(Error::validation(format!("graph crosses the focal set at node {i}")));
        }
        let nn = a.hypot(q);
        let kg = (a * (g.kappa * a - a2nd) + q * (2.0 * q * g.kappa + z * g.dkappa)) / (nn * nn * nn);
        let nug = [(a * g.nu[0] - q * g.t[0]) / nn, (a * g.nu[1] - q * g.t[1]) / nn];
        let xg = [g.p[0] + z * g.nu[0], g.p[1] + z * g.nu[1]];
        if !(xg[1] > 0.0) {
            return Err(Error::validation(format!("graph reaches the axis at node {i}")));
        }
        let h = kg + (self.n() - 1) as f64 * nug[1] / xg[1];
        let v = nn / a;
        let xdotnu = geometry::dot(xg, nug);
        Ok(GraphSpeed { speed: v * (-h + 0.5 * xdotnu), mean_curvature: h, v, xdotnu })
    }

    /// Second-derivative input `Δ_w u - c u'` and first derivative.
    fn jet(&self, u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let q = self.gradient(u)?;
        let lap = self.op.weighted_laplacian(u)?;
        let a = (0..self.len()).map(|i| lap[i] - self.drift[i] * q[i]).collect();
        Ok((q, a))
    }

    /// Per-node graph speed, mean curvature, `v` and `<x, ν>` of the graph.
    pub fn graph_speeds(&self, u: &[f64]) -> Result<Vec<GraphSpeed>> {
        self.check_len(u)?;
        let (q, a) = self.jet(u)?;
        (0..self.len())
            .map(|i| {
                if self.is_interior(i) {
                    self.speed_at(i, u[i], q[i], a[i])
                } else {
                    // boundary nodes carry no equation; report second derivative from the stencil
                    let upp = second_derivative(self.stencils[i], u, i);
                    self.speed_at(i, u[i], q[i], upp)
                }
            })
            .collect()
    }

    /// `E(u) = F(u) - F(0) - Lu` (zero at Dirichlet nodes).
    pub fn error_term(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_graphical(u)?;
        self.error_term_unchecked(u)
    }

    pub(crate) fn error_term_unchecked(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_len(u)?;
        let (q, a) = self.jet(u)?;
        let lu = self.op.apply(u)?;
        (0..self.len())
            .map(|i| {
                if !self.is_interior(i) {
                    return Ok(0.0);
                }
                let f = self.speed_at(i, u[i], q[i], a[i])?.speed;
                Ok(f - self.base_speed[i] - lu[i])
            })
            .collect()
    }

    /// The split `E = u E_1 + ∇u · E_2`: the first part collects the
    /// dependence on `u` at fixed derivatives, the second the dependence on
    /// the derivatives at `u = 0`.
    pub fn error_term_split(&self, u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_graphical(u)?;
        let (q, a) = self.jet(u)?;
        let lap = self.op.weighted_laplacian(u)?;
        let mut e1 = vec![0.0; self.len()];
        let mut e2 = vec![0.0; self.len()];
        for i in 0..self.len() {
            if !self.is_interior(i) {
                continue;
            }
            let full = self.speed_at(i, u[i], q[i], a[i])?.speed;
            let flat = self.speed_at(i, 0.0, q[i], a[i])?.speed;
            e1[i] = full - flat - self.op.potential[i] * u[i];
            e2[i] = flat - self.base_speed[i] - lap[i];
        }
        Ok((e1, e2))
    }

    /// The graph surface `p + u ν` with geometry recomputed from the
    /// displaced nodes, together with `v` per node. The geometric
    /// `v = 1 / <ν_graph, ν>` and the analytic `v = sqrt(1 + (u' / (1 + u κ))^2)`
    /// must agree to `1e-6`.
    pub fn normal_graph(&self, u: &[f64]) -> Result<(SymmetricSoliton, Vec<f64>)> {
        self.check_graphical(u)?;
        let s = &self.soliton;
        let pos: Vec<[f64; 2]> =
            (0..self.len()).map(|i| [s.points[i].x + u[i] * s.nu[i][0], s.points[i].r + u[i] * s.nu[i][1]]).collect();
        let graph = SymmetricSoliton::from_positions(s.kind, s.n, &pos, s.topology, s.orientation)?;
        let q = self.gradient(u)?;
        let mut v = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let geo = 1.0 / geometry::dot(graph.nu[i], s.nu[i]);
            let ana = (1.0 + (q[i] / (1.0 + u[i] * s.kappa[i])).powi(2)).sqrt();
            if (geo - ana).abs() > 1e-6 {
                return Err(Error::numerical(format!(
                    "normal graph: geometric v = {geo:.9} and analytic v = {ana:.9} disagree at node {i}"
                )));
            }
            v.push(ana);
        }
        Ok((graph, v))
    }

    /// Stability cap for IMEX steps: the explicit part multiplies the stiff
    /// second derivative by `∂F/∂u'' - 1`, which is harmless while its
    /// magnitude stays below one; otherwise the explicit bound
    /// `0.4 h^2 / |∂F/∂u'' - 1|` applies.
    pub fn stability_bound(&self, u: &[f64]) -> Result<StabilityBound> {
        let (q, _) = self.jet(u)?;
        let mut worst: f64 = 0.0;
        for i in 0..self.len() {
            let a = 1.0 + u[i] * self.geom[i].kappa;
            worst = worst.max((1.0 / (a * a + q[i] * q[i]) - 1.0).abs());
        }
        let (hmin, _) = self.soliton.spacing_range();
        let explicit = 0.4 * hmin * hmin;
        let dtau_max = if worst < 1.0 { MAX_DTAU } else { (explicit / worst).min(MAX_DTAU) };
        Ok(StabilityBound { explicit_bound: explicit, remainder_coefficient: worst, dtau_max })
    }
}

/// Accuracy cap on the time step.
pub const MAX_DTAU: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityBound {
    /// `0.4 h_min^2`, the bound for a fully explicit second-order term.
    pub explicit_bound: f64,
    /// `max |∂F/∂u'' - 1|` over the nodes.
    pub remainder_coefficient: f64,
    pub dtau_max: f64,
}

/// Convenience wrapper: `||u||_k^{(d)}` on a soliton.
pub fn weighted_norm(s: &SymmetricSoliton, u: &[f64], k: usize, d: f64) -> Result<f64> {
    FlowBase::new(s)?.weighted_norm(u, k, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soliton::{build_cylinder, build_sphere, SolitonMode};
    use approx::assert_relative_eq;

    #[test]
    fn zero_graph_is_the_base() {
        let b = FlowBase::new(&build_sphere(2, 200).unwrap()).unwrap();
        let u = vec![0.0; b.len()];
        let (g, v) = b.normal_graph(&u).unwrap();
        assert!(v.iter().all(|x| *x == 1.0));
        assert_eq!(g.h, b.soliton.h);
        assert!(b.error_term(&u).unwrap().iter().all(|e| *e == 0.0));
    }

    #[test]
    fn concentric_sphere() {
        let b = FlowBase::new(&build_sphere(2, 400).unwrap()).unwrap();
        let u = vec![0.1; b.len()];
        let (g, _) = b.normal_graph(&u).unwrap();
        for h in &g.h {
            assert_relative_eq!(*h, 2.0 / 2.1, epsilon = 1e-6);
        }
        let e = b.error_term(&u).unwrap();
        let rho: f64 = 2.1;
        for v in &e {
            assert_relative_eq!(*v, -2.0 / rho + rho / 2.0 - 0.1, epsilon = 1e-9);
        }
        assert_relative_eq!(e[0], -0.002380952380952, epsilon = 1e-9);
    }

    #[test]
    fn cylinder_v_agreement() {
        let b = FlowBase::new(&build_cylinder(2, 8.0, 400).unwrap()).unwrap();
        let u: Vec<f64> = b.soliton.points.iter().map(|p| 0.01 * p.x.sin()).collect();
        let (_, v) = b.normal_graph(&u).unwrap();
        assert!(v.iter().all(|x| *x >= 1.0));
    }

    #[test]
    fn split_sums_to_error() {
        let b = FlowBase::new(&build_sphere(2, 300).unwrap()).unwrap();
        let u: Vec<f64> = b.soliton.points.iter().map(|p| 0.02 * (p.x / 2.0) + 0.01).collect();
        let e = b.error_term(&u).unwrap();
        let (e1, e2) = b.error_term_split(&u).unwrap();
        for i in 0..e.len() {
            assert!((e1[i] + e2[i] - e[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn norms_on_the_sphere() {
        let s = build_sphere(2, 200).unwrap();
        let b = FlowBase::new(&s).unwrap();
        let one = vec![1.0; s.len()];
        assert_relative_eq!(b.weighted_norm(&one, 0, 1.0).unwrap(), 1.0 / 5f64.sqrt(), epsilon = 1e-12);
        assert_eq!(b.weighted_norm(&vec![0.0; s.len()], 2, 1.0).unwrap(), 0.0);
        assert!(b.weighted_norm(&one, 3, 1.0).is_err());
        assert!(s.residual_sup(SolitonMode::Shrinker) < 1e-10);
    }

    #[test]
    fn graphicality_is_enforced() {
        let b = FlowBase::new(&build_sphere(2, 200).unwrap()).unwrap();
        let u = vec![1.5; b.len()];
        assert!(matches!(b.error_term(&u), Err(Error::Validation(_))));
    }
}
