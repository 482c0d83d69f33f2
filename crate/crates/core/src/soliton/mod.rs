//! Rotationally symmetric hypersurfaces of R^{n+1} stored as discretized
//! profile curves in the (x, r) half-plane, rotated about the x axis.
//!
//! Conventions, fixed once for the whole crate:
//!
//! * the tangent angle `theta` satisfies `x' = cos(theta)`, `r' = sin(theta)`;
//! * with [`Orientation::Right`] the unit normal is `(sin theta, -cos theta)`,
//!   the right-hand normal of the direction of travel;
//! * `H` is the divergence of the normal, `H = kappa - (n-1) cos(theta) / r`,
//!   so round spheres traversed counterclockwise have `H = n / radius > 0`;
//! * shrinkers satisfy `H = <x, nu> / 2`, expanders `H = -<x, nu> / 2`.
//!
//! Spheres and cylinders are built so that their normal points away from
//! the enclosed region; the sphere of radius `sqrt(2n)` and the cylinder of
//! radius `sqrt(2(n-1))` then have zero residual, which pins the convention.

pub(crate) mod geometry;
mod shooting;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ensure, Error, Result};

pub use shooting::{
    conical_end, find_expander, find_torus, scan_torus_defects, shoot_profile, torus_closure_defect,
    ConicalEnd, DecayReport, ShootInit, ShotProfile, Termination, TorusConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub s: f64,
    pub x: f64,
    pub r: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolitonKind {
    Sphere,
    Cylinder,
    Torus,
    ConicalEnd,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndKind {
    /// The profile meets the rotation axis perpendicularly half a cell
    /// beyond the end node.
    Axis,
    /// Truncation: the end node is a boundary node (Dirichlet for `L`).
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// Closed loop in the half-plane (tori).
    Periodic,
    Ends { start: EndKind, end: EndKind },
}

impl Topology {
    pub const SPHERE: Topology = Topology::Ends { start: EndKind::Axis, end: EndKind::Axis };
    pub const OPEN: Topology = Topology::Ends { start: EndKind::Free, end: EndKind::Free };

    /// Whether the rotated surface is closed (compact without boundary).
    pub fn closed(self) -> bool {
        matches!(self, Topology::Periodic | Topology::SPHERE)
    }

    /// Whether node `i` of an `m`-node profile is a truncation boundary node.
    pub fn is_boundary(self, i: usize, m: usize) -> bool {
        match self {
            Topology::Periodic => false,
            Topology::Ends { start, end } => {
                (i == 0 && start == EndKind::Free) || (i + 1 == m && end == EndKind::Free)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Normal is the right-hand normal of the direction of travel.
    Right,
    Left,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Right => 1.0,
            Orientation::Left => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolitonMode {
    Shrinker,
    Expander,
}

impl SolitonMode {
    pub fn sigma(self) -> f64 {
        match self {
            SolitonMode::Shrinker => 1.0,
            SolitonMode::Expander => -1.0,
        }
    }
}

/// A discretized rotationally symmetric hypersurface with per-node geometry.
#[derive(Debug, Clone)]
pub struct SymmetricSoliton {
    pub kind: SolitonKind,
    /// Surface dimension; the ambient space is R^{n+1}.
    pub n: usize,
    pub points: Vec<ProfilePoint>,
    pub h: Vec<f64>,
    pub a2: Vec<f64>,
    pub nu: Vec<[f64; 2]>,
    pub xdotnu: Vec<f64>,
    pub rtilde: Vec<f64>,
    pub closed: bool,
    pub orientation: Orientation,
    pub topology: Topology,
    /// Signed profile curvature `d theta / ds`.
    pub kappa: Vec<f64>,
    pub tangent: Vec<[f64; 2]>,
    /// Arclength quadrature cells.
    pub cell: Vec<f64>,
}

impl SymmetricSoliton {
    /// Builds a soliton from profile points, recomputing all geometry from
    /// the node positions. The stored `theta` and `s` of the points are kept.
    pub fn from_points(
        kind: SolitonKind,
        n: usize,
        points: Vec<ProfilePoint>,
        topology: Topology,
        orientation: Orientation,
    ) -> Result<Self> {
        ensure(n >= 1, || format!("dimension n must be >= 1, got {n}"))?;
        let pos: Vec<[f64; 2]> = points.iter().map(|p| [p.x, p.r]).collect();
        let t = geometry::compute(&pos, topology, orientation, n)?;
        Ok(SymmetricSoliton {
            kind,
            n,
            points,
            h: t.mean_curvature,
            a2: t.a2,
            nu: t.normal,
            xdotnu: t.xdotnu,
            rtilde: t.rtilde,
            closed: topology.closed(),
            orientation,
            topology,
            kappa: t.kappa,
            tangent: t.tangent,
            cell: t.cell,
        })
    }

    /// Builds a surface from bare positions; arclength and tangent angle are
    /// derived from the discrete geometry.
    pub fn from_positions(
        kind: SolitonKind,
        n: usize,
        pos: &[[f64; 2]],
        topology: Topology,
        orientation: Orientation,
    ) -> Result<Self> {
        let t = geometry::compute(pos, topology, orientation, n)?;
        let s = geometry::chord_arclength(pos, 0.0);
        let points = pos
            .iter()
            .zip(s.iter().zip(&t.theta))
            .map(|(p, (&s, &theta))| ProfilePoint { s, x: p[0], r: p[1], theta })
            .collect();
        Ok(SymmetricSoliton {
            kind,
            n,
            points,
            h: t.mean_curvature,
            a2: t.a2,
            nu: t.normal,
            xdotnu: t.xdotnu,
            rtilde: t.rtilde,
            closed: topology.closed(),
            orientation,
            topology,
            kappa: t.kappa,
            tangent: t.tangent,
            cell: t.cell,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> Vec<[f64; 2]> {
        self.points.iter().map(|p| [p.x, p.r]).collect()
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.topology.is_boundary(i, self.len())
    }

    /// `|x|^2` at node `i`.
    pub fn radius2(&self, i: usize) -> f64 {
        let p = &self.points[i];
        p.x * p.x + p.r * p.r
    }

    /// Largest principal curvature magnitude over the nodes.
    pub fn max_principal_curvature(&self) -> f64 {
        let nm1 = (self.n - 1) as f64;
        (0..self.len())
            .map(|i| {
                let rot = if nm1 > 0.0 { (self.nu[i][1] / self.points[i].r).abs() } else { 0.0 };
                self.kappa[i].abs().max(rot)
            })
            .fold(0.0, f64::max)
    }

    /// Smallest and largest node spacing (chord lengths).
    pub fn spacing_range(&self) -> (f64, f64) {
        let pos = self.positions();
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        let m = pos.len();
        let segs = if self.topology == Topology::Periodic { m } else { m - 1 };
        for i in 0..segs {
            let d = geometry::norm(geometry::sub(pos[(i + 1) % m], pos[i]));
            lo = lo.min(d);
            hi = hi.max(d);
        }
        (lo, hi)
    }

    /// Hash of everything that determines the discrete operators on this
    /// surface: dimension, topology, orientation and node positions.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n as u64).to_le_bytes());
        h.update(format!("{:?}{:?}", self.topology, self.orientation).as_bytes());
        for p in &self.points {
            h.update(p.x.to_bits().to_le_bytes());
            h.update(p.r.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Sup-norm of the soliton residual.
    pub fn residual_sup(&self, mode: SolitonMode) -> f64 {
        soliton_residual_values(self, mode).iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Accepts the surface as a shrinker if its residual sup is within `tol`.
    pub fn accept_shrinker(&self, tol: f64) -> Result<()> {
        let res = self.residual_sup(SolitonMode::Shrinker);
        if res <= tol {
            Ok(())
        } else {
            Err(Error::numerical(format!("shrinker residual {res:.3e} exceeds tolerance {tol:.3e}")))
        }
    }
}

/// Surface area of the unit (n-1)-sphere.
pub fn unit_sphere_area(dim: usize) -> f64 {
    // |S^k| = 2 pi^{(k+1)/2} / Gamma((k+1)/2)
    let a = (dim as f64 + 1.0) / 2.0;
    2.0 * PI.powf(a) / statrs::function::gamma::gamma(a)
}

/// Round sphere of arbitrary radius, sampled at `m` cell-centred nodes from
/// the positive x axis counterclockwise to the negative x axis.
pub fn build_round_sphere(n: usize, radius: f64, m: usize) -> Result<SymmetricSoliton> {
    ensure(n >= 1, || format!("dimension n must be >= 1, got {n}"))?;
    ensure(m >= 16, || format!("grid size m must be >= 16, got {m}"))?;
    ensure(radius > 0.0 && radius.is_finite(), || format!("radius must be positive, got {radius}"))?;
    let points = (0..m)
        .map(|i| {
            let phi = (i as f64 + 0.5) * PI / m as f64;
            ProfilePoint { s: radius * phi, x: radius * phi.cos(), r: radius * phi.sin(), theta: phi + PI / 2.0 }
        })
        .collect();
    let kind = if (radius * radius - 2.0 * n as f64).abs() < 1e-12 { SolitonKind::Sphere } else { SolitonKind::Custom };
    SymmetricSoliton::from_points(kind, n, points, Topology::SPHERE, Orientation::Right)
}

/// The shrinking sphere `S^n(sqrt(2n))`.
pub fn build_sphere(n: usize, m: usize) -> Result<SymmetricSoliton> {
    ensure(n >= 1, || format!("dimension n must be >= 1, got {n}"))?;
    build_round_sphere(n, (2.0 * n as f64).sqrt(), m)
}

/// Round cylinder of arbitrary radius over `|x| <= x_max`, traversed from
/// `+x_max` to `-x_max` so that the normal points away from the axis.
pub fn build_round_cylinder(n: usize, radius: f64, x_max: f64, m: usize) -> Result<SymmetricSoliton> {
    ensure(n >= 2, || format!("cylinders need n >= 2, got {n}"))?;
    ensure(m >= 16, || format!("grid size m must be >= 16, got {m}"))?;
    ensure(x_max > 0.0, || format!("x_max must be positive, got {x_max}"))?;
    let dx = 2.0 * x_max / (m - 1) as f64;
    let points = (0..m)
        .map(|i| {
            let s = i as f64 * dx;
            ProfilePoint { s, x: x_max - s, r: radius, theta: PI }
        })
        .collect();
    let kind =
        if (radius * radius - 2.0 * (n as f64 - 1.0)).abs() < 1e-12 { SolitonKind::Cylinder } else { SolitonKind::Custom };
    SymmetricSoliton::from_points(kind, n, points, Topology::OPEN, Orientation::Right)
}

/// The shrinking cylinder `R x S^{n-1}(sqrt(2(n-1)))` truncated to `|x| <= x_max`.
pub fn build_cylinder(n: usize, x_max: f64, m: usize) -> Result<SymmetricSoliton> {
    ensure(n >= 2, || format!("cylinders need n >= 2, got {n}"))?;
    ensure(x_max >= 4.0, || format!("x_max must be >= 4, got {x_max}"))?;
    build_round_cylinder(n, (2.0 * (n as f64 - 1.0)).sqrt(), x_max, m)
}

/// The hyperplane `{x = x_plane}` as a disc of radius `r_max`, normal `+e_axis`.
pub fn build_plane(n: usize, x_plane: f64, r_max: f64, m: usize) -> Result<SymmetricSoliton> {
    ensure(m >= 16, || format!("grid size m must be >= 16, got {m}"))?;
    ensure(r_max > 0.0, || format!("r_max must be positive, got {r_max}"))?;
    let h = r_max / (m as f64 - 0.5);
    let points = (0..m)
        .map(|i| {
            let s = (i as f64 + 0.5) * h;
            ProfilePoint { s, x: x_plane, r: s, theta: PI / 2.0 }
        })
        .collect();
    SymmetricSoliton::from_points(
        SolitonKind::Custom,
        n,
        points,
        Topology::Ends { start: EndKind::Axis, end: EndKind::Free },
        Orientation::Right,
    )
}

fn soliton_residual_values(s: &SymmetricSoliton, mode: SolitonMode) -> Vec<f64> {
    let sigma = mode.sigma();
    s.h.iter().zip(&s.xdotnu).map(|(h, xn)| h - sigma * 0.5 * xn).collect()
}

/// Per-node residual `H - sigma <x, nu> / 2` (sigma = +1 shrinker, -1
/// expander) from the discrete geometry.
pub fn soliton_residual(s: &SymmetricSoliton, mode: SolitonMode) -> Result<Vec<f64>> {
    ensure(s.len() >= 3, || format!("profile needs at least 3 points, got {}", s.len()))?;
    Ok(soliton_residual_values(s, mode))
}

// ---------------------------------------------------------------------------
// serialization

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileHeader {
    pub kind: SolitonKind,
    pub n: usize,
    pub closed: bool,
    pub orientation: Orientation,
    pub topology: Topology,
    pub residual_sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRecord {
    pub s: f64,
    pub x: f64,
    pub r: f64,
    pub theta: f64,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "A2")]
    pub a2: f64,
    pub xdotnu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileFile {
    pub header: ProfileHeader,
    pub points: Vec<ProfileRecord>,
}

impl ProfileFile {
    pub fn from_soliton(s: &SymmetricSoliton) -> Self {
        ProfileFile {
            header: ProfileHeader {
                kind: s.kind,
                n: s.n,
                closed: s.closed,
                orientation: s.orientation,
                topology: s.topology,
                residual_sup: s.residual_sup(SolitonMode::Shrinker),
            },
            points: s
                .points
                .iter()
                .enumerate()
                .map(|(i, p)| ProfileRecord {
                    s: p.s,
                    x: p.x,
                    r: p.r,
                    theta: p.theta,
                    h: s.h[i],
                    a2: s.a2[i],
                    xdotnu: s.xdotnu[i],
                })
                .collect(),
        }
    }

    /// Rebuilds the soliton; geometry is recomputed from the positions.
    pub fn to_soliton(&self) -> Result<SymmetricSoliton> {
        let pts = self.points.iter().map(|p| ProfilePoint { s: p.s, x: p.x, r: p.r, theta: p.theta }).collect();
        SymmetricSoliton::from_points(self.header.kind, self.header.n, pts, self.header.topology, self.header.orientation)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
