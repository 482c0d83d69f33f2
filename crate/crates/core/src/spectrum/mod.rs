//! The stability operator `L = Δ - x·∇/2 + 1/2 + |A|^2` of a rotationally
//! symmetric soliton, discretized by finite volumes in the Gaussian-weighted
//! space, restricted to rotationally invariant functions.
//!
//! Eigenvalues follow the convention `L φ = -λ φ`, so unstable directions
//! have `λ < 0` (the sphere's constant function has `λ = -1`).

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audit::AuditReport;
use crate::error::{ensure, Error, Result};
use crate::linalg::SymTridiag;
use crate::soliton::{geometry, unit_sphere_area, SymmetricSoliton, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Closed surface, no boundary nodes.
    None,
    /// Truncated surface; free-end nodes carry homogeneous Dirichlet data.
    Dirichlet,
}

/// Quadrature weights `W_i = cell_i |S^{n-1}| r_i^{n-1} (4π)^{-n/2} e^{-|x_i|^2/4}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGrid {
    pub weights: Vec<f64>,
    /// Weighted area density per unit arclength at each node.
    pub density: Vec<f64>,
    pub boundary: Boundary,
    /// `false` at Dirichlet boundary nodes.
    pub interior: Vec<bool>,
    pub base_digest: String,
}

impl WeightedGrid {
    pub fn new(s: &SymmetricSoliton) -> Self {
        let n = s.n as f64;
        let area = unit_sphere_area(s.n - 1);
        let norm = (4.0 * PI).powf(-n / 2.0);
        let density: Vec<f64> = s
            .points
            .iter()
            .map(|p| area * p.r.powf(n - 1.0) * norm * (-(p.x * p.x + p.r * p.r) / 4.0).exp())
            .collect();
        let weights = density.iter().zip(&s.cell).map(|(d, c)| d * c).collect();
        let m = s.len();
        let interior: Vec<bool> = (0..m).map(|i| !s.is_boundary(i)).collect();
        let boundary = if interior.iter().all(|b| *b) { Boundary::None } else { Boundary::Dirichlet };
        WeightedGrid { weights, density, boundary, interior, base_digest: s.digest() }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Total weighted mass, the F-area of the (possibly truncated) surface.
    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn interior_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.interior[i]).collect()
    }

    pub fn norm(&self, u: &[f64]) -> f64 {
        self.weights.iter().zip(u).map(|(w, v)| w * v * v).sum::<f64>().sqrt()
    }

    /// Weighted norm over interior nodes only.
    pub fn interior_norm(&self, u: &[f64]) -> f64 {
        (0..self.len()).filter(|&i| self.interior[i]).map(|i| self.weights[i] * u[i] * u[i]).sum::<f64>().sqrt()
    }
}

/// `<u, v>_W`.
pub fn weighted_inner(u: &[f64], v: &[f64], grid: &WeightedGrid) -> Result<f64> {
    ensure(u.len() == grid.len() && v.len() == grid.len(), || {
        format!("length mismatch: u has {}, v has {}, grid has {} nodes", u.len(), v.len(), grid.len())
    })?;
    Ok(grid.weights.iter().zip(u.iter().zip(v)).map(|(w, (a, b))| w * a * b).sum())
}

/// Finite-volume discretization of `L`:
/// `(Lu)_i = (1/W_i) Σ_f c_f (u_j - u_i) + (1/2 + |A|^2_i) u_i`,
/// with face conductance `c_f` = mean node density over the chord length.
#[derive(Debug, Clone)]
pub struct StabilityOperator {
    pub grid: WeightedGrid,
    /// `(i, j, c_f)` for every face between neighbouring nodes.
    pub faces: Vec<(usize, usize, f64)>,
    /// `1/2 + |A|^2` per node.
    pub potential: Vec<f64>,
}

impl StabilityOperator {
    pub fn new(s: &SymmetricSoliton) -> Result<Self> {
        let m = s.len();
        ensure(m >= 5, || format!("the stability operator needs at least 5 nodes, got {m}"))?;
        let grid = WeightedGrid::new(s);
        let pos = s.positions();
        let nfaces = if s.topology == Topology::Periodic { m } else { m - 1 };
        let faces = (0..nfaces)
            .map(|i| {
                let j = (i + 1) % m;
                let chord = geometry::norm(geometry::sub(pos[j], pos[i]));
                (i, j, 0.5 * (grid.density[i] + grid.density[j]) / chord)
            })
            .collect();
        let potential = s.a2.iter().map(|a| 0.5 + a).collect();
        Ok(StabilityOperator { grid, faces, potential })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// `Lu` at interior nodes; Dirichlet boundary nodes act as data and get 0.
    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        let lap = self.weighted_laplacian(u)?;
        Ok((0..self.len()).map(|i| if self.grid.interior[i] { lap[i] + self.potential[i] * u[i] } else { 0.0 }).collect())
    }

    /// Flux part `(1/W_i) Σ_f c_f (u_j - u_i)`, the weighted Laplacian
    /// `Δu - x·∇u/2`; zero at Dirichlet nodes.
    pub fn weighted_laplacian(&self, u: &[f64]) -> Result<Vec<f64>> {
        let m = self.len();
        ensure(u.len() == m, || format!("function has {} values, operator has {m} nodes", u.len()))?;
        let mut flux = vec![0.0; m];
        for &(i, j, c) in &self.faces {
            let f = c * (u[j] - u[i]);
            flux[i] += f;
            flux[j] -= f;
        }
        Ok((0..m).map(|i| if self.grid.interior[i] { flux[i] / self.grid.weights[i] } else { 0.0 }).collect())
    }

    /// The symmetric matrix `A = -W L` on the interior unknowns, in the
    /// order of [`WeightedGrid::interior_indices`].
    pub fn weighted_matrix(&self) -> SymTridiag {
        let idx = self.grid.interior_indices();
        let m = self.len();
        let mut pos = vec![usize::MAX; m];
        for (k, &i) in idx.iter().enumerate() {
            pos[i] = k;
        }
        let k = idx.len();
        let mut d: Vec<f64> = idx.iter().map(|&i| -self.grid.weights[i] * self.potential[i]).collect();
        let mut e = vec![0.0; k.saturating_sub(1)];
        let mut corner = None;
        for &(i, j, c) in &self.faces {
            let (pi, pj) = (pos[i], pos[j]);
            if pi != usize::MAX {
                d[pi] += c;
            }
            if pj != usize::MAX {
                d[pj] += c;
            }
            if pi != usize::MAX && pj != usize::MAX {
                if pj == pi + 1 {
                    e[pi] = -c;
                } else {
                    corner = Some(-c);
                }
            }
        }
        SymTridiag { d, e, corner }
    }
}

/// Convenience wrapper: `Lu` on the soliton `s`.
pub fn apply_l(s: &SymmetricSoliton, grid: &WeightedGrid, u: &[f64]) -> Result<Vec<f64>> {
    ensure(grid.base_digest == s.digest(), || "grid was built on a different base".into())?;
    StabilityOperator::new(s)?.apply(u)
}

/// Relative residual `||Lu + λu||_W / ||u||_W` over interior nodes.
pub fn eigen_residual(op: &StabilityOperator, u: &[f64], lambda: f64) -> Result<f64> {
    let lu = op.apply(u)?;
    let r: Vec<f64> = lu.iter().zip(u).map(|(a, b)| a + lambda * b).collect();
    let num = op.grid.interior_norm(&r);
    let den = op.grid.interior_norm(u);
    if den > 0.0 {
        Ok(num / den)
    } else {
        // u vanishes on the interior (for example <ν, e_axis> on a cylinder);
        // boundary values lie outside the operator's domain
        Ok(0.0)
    }
}

// ---------------------------------------------------------------------------
// spectrum

pub const DEFAULT_KAPPA_KERNEL: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Reported eigenvalues: Richardson-extrapolated when a refined solve
    /// was supplied, otherwise the discrete values.
    pub lambdas: Vec<f64>,
    /// Eigenvalues of the discrete operator on this grid.
    pub discrete_lambdas: Vec<f64>,
    /// Eigenvalues on the doubled grid, when available.
    pub refined_lambdas: Option<Vec<f64>>,
    /// Eigenfunctions on all nodes (zero at Dirichlet nodes), `||φ_j||_W = 1`.
    pub phis: Vec<Vec<f64>>,
    pub index: usize,
    pub kernel: usize,
    pub kappa_kernel: f64,
    pub warnings: Vec<String>,
    pub grid: WeightedGrid,
    pub s: Vec<f64>,
}

impl Spectrum {
    pub fn count(&self) -> usize {
        self.lambdas.len()
    }

    pub fn base_digest(&self) -> &str {
        &self.grid.base_digest
    }

    /// Coefficients `<u, φ_j>_W`.
    pub fn coefficients(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.phis.iter().map(|p| weighted_inner(u, p, &self.grid)).collect()
    }

    /// `||u - Σ_j <u,φ_j> φ_j||_W`, the part of `u` outside the computed modes.
    pub fn tail(&self, u: &[f64]) -> Result<f64> {
        let c = self.coefficients(u)?;
        let mut r = u.to_vec();
        for (cj, p) in c.iter().zip(&self.phis) {
            r.iter_mut().zip(p).for_each(|(a, b)| *a -= cj * b);
        }
        Ok(self.grid.norm(&r))
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa_kernel = kappa;
        self.classify();
        self
    }

    /// Pairs this spectrum with one computed on the doubled grid and reports
    /// the Richardson values `(4 λ_{2m} - λ_m) / 3`.
    pub fn with_refinement(mut self, fine: &Spectrum) -> Result<Self> {
        ensure(fine.count() >= self.count(), || "refined spectrum has fewer modes".into())?;
        let refined: Vec<f64> = fine.discrete_lambdas[..self.count()].to_vec();
        self.lambdas = self.discrete_lambdas.iter().zip(&refined).map(|(c, f)| (4.0 * f - c) / 3.0).collect();
        self.refined_lambdas = Some(refined);
        self.classify();
        Ok(self)
    }

    fn classify(&mut self) {
        let ik = index_and_kernel(self);
        self.index = ik.index;
        self.kernel = ik.kernel;
        self.warnings = ik.warnings;
    }

    pub fn summary(&self) -> SpectrumSummary {
        SpectrumSummary {
            lambdas: self.lambdas.clone(),
            discrete_lambdas: self.discrete_lambdas.clone(),
            refined_lambdas: self.refined_lambdas.clone(),
            index: self.index,
            kernel: self.kernel,
            kappa_kernel: self.kappa_kernel,
            base_digest: self.grid.base_digest.clone(),
            warnings: self.warnings.clone(),
        }
    }
}

/// Serialized form of a spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub lambdas: Vec<f64>,
    pub discrete_lambdas: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refined_lambdas: Option<Vec<f64>>,
    #[serde(rename = "I")]
    pub index: usize,
    #[serde(rename = "K")]
    pub kernel: usize,
    pub kappa_kernel: f64,
    pub base_digest: String,
    pub warnings: Vec<String>,
}

/// Lowest `count` eigenpairs of `-L` in the rotationally invariant sector.
pub fn eigensolve(s: &SymmetricSoliton, count: usize) -> Result<Spectrum> {
    let op = StabilityOperator::new(s)?;
    eigensolve_operator(&op, s, count)
}

pub fn eigensolve_operator(op: &StabilityOperator, s: &SymmetricSoliton, count: usize) -> Result<Spectrum> {
    let grid = &op.grid;
    let idx = grid.interior_indices();
    ensure(count >= 1 && count + 2 <= s.len(), || {
        format!("count must lie in [1, {}], got {count}", s.len().saturating_sub(2))
    })?;
    ensure(count <= idx.len(), || format!("only {} interior nodes for {count} modes", idx.len()))?;
    let a = op.weighted_matrix();
    // B = W^{-1/2} A W^{-1/2}
    let sq: Vec<f64> = idx.iter().map(|&i| grid.weights[i].sqrt()).collect();
    let b = SymTridiag {
        d: a.d.iter().zip(&sq).map(|(d, w)| d / (w * w)).collect(),
        e: a.e.iter().enumerate().map(|(k, e)| e / (sq[k] * sq[k + 1])).collect(),
        corner: a.corner.map(|c| c / (sq[0] * sq[sq.len() - 1])),
    };
    let (lambdas, vecs) = b.lowest_eigenpairs(count)?;
    let m = s.len();
    let mut phis = Vec::with_capacity(count);
    for (j, y) in vecs.iter().enumerate() {
        let mut phi = vec![0.0; m];
        for (k, &i) in idx.iter().enumerate() {
            phi[i] = y[k] / sq[k];
        }
        let nrm = grid.norm(&phi);
        let sign = if j == 0 {
            phi.iter().sum::<f64>().signum()
        } else {
            let imax = (0..m).max_by(|&a, &b| phi[a].abs().total_cmp(&phi[b].abs())).unwrap_or(0);
            phi[imax].signum()
        };
        let f = if sign == 0.0 { 1.0 } else { sign } / nrm;
        phi.iter_mut().for_each(|v| *v *= f);
        phis.push(phi);
    }
    let mut spec = Spectrum {
        lambdas: lambdas.clone(),
        discrete_lambdas: lambdas,
        refined_lambdas: None,
        phis,
        index: 0,
        kernel: 0,
        kappa_kernel: DEFAULT_KAPPA_KERNEL,
        warnings: Vec::new(),
        grid: grid.clone(),
        s: s.points.iter().map(|p| p.s).collect(),
    };
    spec.classify();
    Ok(spec)
}

/// Index and kernel dimension of a spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexKernel {
    pub index: usize,
    pub kernel: usize,
    pub warnings: Vec<String>,
}

/// `I = #{λ < -κ}`, `K = #{|λ| <= κ}`. Eigenvalues whose magnitude lies
/// within a factor of two of `κ` are reported as ambiguous.
pub fn index_and_kernel(spec: &Spectrum) -> IndexKernel {
    classify_lambdas(&spec.lambdas, spec.kappa_kernel)
}

pub fn classify_lambdas(lambdas: &[f64], kappa: f64) -> IndexKernel {
    let index = lambdas.iter().filter(|l| **l < -kappa).count();
    let kernel = lambdas.iter().filter(|l| l.abs() <= kappa).count();
    let warnings = lambdas
        .iter()
        .enumerate()
        .filter(|(_, l)| l.abs() > 0.5 * kappa && l.abs() < 2.0 * kappa)
        .map(|(j, l)| format!("eigenvalue {} = {l:.3e} is within a factor 2 of the kernel threshold {kappa:.1e}", j + 1))
        .collect();
    IndexKernel { index, kernel, warnings }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Lt,
    Eq,
    Gt,
    Le,
    Ge,
    Ne,
}

impl Relation {
    /// Whether eigenvalue `lambda` is selected relative to `mu`, using the
    /// window `|λ - μ| < κ` for equality.
    pub fn selects(self, lambda: f64, mu: f64, kappa: f64) -> bool {
        let eq = (lambda - mu).abs() < kappa;
        match self {
            Relation::Eq => eq,
            Relation::Ne => !eq,
            Relation::Lt => !eq && lambda < mu,
            Relation::Gt => !eq && lambda > mu,
            Relation::Le => eq || lambda < mu,
            Relation::Ge => eq || lambda > mu,
        }
    }
}

/// Spectral projector `Π_{∼μ} u = Σ_{λ_j ∼ μ} <u, φ_j>_W φ_j`.
pub fn project(spec: &Spectrum, u: &[f64], relation: Relation, mu: f64) -> Result<Vec<f64>> {
    ensure(u.len() == spec.grid.len(), || format!("function has {} values, grid has {}", u.len(), spec.grid.len()))?;
    let mut out = vec![0.0; u.len()];
    for (lam, phi) in spec.lambdas.iter().zip(&spec.phis) {
        if relation.selects(*lam, mu, spec.kappa_kernel) {
            let c = weighted_inner(u, phi, &spec.grid)?;
            out.iter_mut().zip(phi).for_each(|(o, p)| *o += c * p);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// audits

/// Upper bound on the Dirichlet boundary-layer influence used to keep the
/// decay fit away from the truncation.
const BOUNDARY_LAYER_EPS: f64 = 1e-3;

/// Fits the log-log slope of `φ_1` against `1 + |x|^2` on the outer third of
/// the region unaffected by the Dirichlet truncation and checks it lies in
/// `[1/2 + λ_1 - β, 1/2 + λ_1 + β]`.
pub fn eigen_decay_check(spec: &Spectrum, base: &SymmetricSoliton, beta: f64) -> Result<AuditReport> {
    ensure(beta > 0.0, || format!("beta must be positive, got {beta}"))?;
    ensure(!base.closed, || "eigen_decay_check needs a non-compact (truncated) base".into())?;
    ensure(spec.base_digest() == base.digest(), || "spectrum was computed on a different base".into())?;
    let mut rep = AuditReport::new("eigen_decay");
    let phi = &spec.phis[0];
    let r2: Vec<f64> = (0..base.len()).map(|i| base.radius2(i)).collect();
    let r2_max = r2.iter().cloned().fold(0.0, f64::max);
    let r2_min = r2.iter().cloned().fold(f64::INFINITY, f64::min);
    // Dirichlet data at |x| = R perturbs φ by about exp((|x|^2 - R^2)/4)
    let limit = (r2_max + 4.0 * BOUNDARY_LAYER_EPS.ln()).sqrt();
    let inner = r2_min.sqrt();
    if !(limit > inner) {
        return Err(Error::validation("truncation too short: the boundary layer covers the whole domain"));
    }
    let lo = inner + 2.0 / 3.0 * (limit - inner);
    let sel: Vec<usize> = (0..base.len()).filter(|&i| spec.grid.interior[i] && r2[i].sqrt() >= lo && r2[i].sqrt() <= limit).collect();
    rep.note(format!("fit window |x| in [{lo:.4}, {limit:.4}], {} nodes", sel.len()));
    if sel.len() < 3 {
        return Err(Error::validation("fit window holds fewer than 3 nodes"));
    }
    let sign_ok = sel.iter().all(|&i| phi[i] > 0.0);
    rep.check_flag("phi1_one_signed_in_window", sign_ok, "");
    if !sign_ok {
        return Ok(rep);
    }
    let xs: Vec<f64> = sel.iter().map(|&i| (1.0 + r2[i]).ln()).collect();
    let ys: Vec<f64> = sel.iter().map(|&i| phi[i].ln()).collect();
    let slope = crate::stats::ls_slope(&xs, &ys);
    let mu = spec.lambdas[0];
    rep.constant("slope", slope);
    rep.constant("lambda1", mu);
    rep.constant("beta", beta);
    rep.check_ge("slope_lower", slope, 0.5 + mu - beta);
    rep.check_le("slope_upper", slope, 0.5 + mu + beta);
    Ok(rep)
}

/// Random symmetry test `|<Lu,v>_W - <u,Lv>_W| <= 1e-8 ||u||_W ||v||_W`
/// for interior-supported `u`, `v`.
pub fn selfadjoint_check(s: &SymmetricSoliton, trials: usize, seed: u64) -> Result<AuditReport> {
    ensure(trials >= 1, || "trials must be >= 1".into())?;
    let op = StabilityOperator::new(s)?;
    let m = s.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let mut draw = || -> Vec<f64> {
            (0..m).map(|i| if op.grid.interior[i] { rng.random_range(-1.0..1.0) } else { 0.0 }).collect()
        };
        let u = draw();
        let v = draw();
        let lu = op.apply(&u)?;
        let lv = op.apply(&v)?;
        let a = weighted_inner(&lu, &v, &op.grid)?;
        let b = weighted_inner(&u, &lv, &op.grid)?;
        worst = worst.max((a - b).abs() / (op.grid.norm(&u) * op.grid.norm(&v)));
    }
    let mut rep = AuditReport::new("selfadjoint");
    rep.constant("trials", trials as f64);
    rep.check_le("max_relative_asymmetry", worst, 1e-8);
    Ok(rep)
}

/// Residuals of the two structural eigenfunctions of every shrinker:
/// `L H = H` and `L <ν, e_axis> = <ν, e_axis> / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralResiduals {
    pub mean_curvature: f64,
    pub axial_translation: f64,
}

pub fn structural_residuals(s: &SymmetricSoliton) -> Result<StructuralResiduals> {
    let op = StabilityOperator::new(s)?;
    let nux: Vec<f64> = s.nu.iter().map(|v| v[0]).collect();
    Ok(StructuralResiduals {
        mean_curvature: eigen_residual(&op, &s.h, -1.0)?,
        axial_translation: eigen_residual(&op, &nux, -0.5)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soliton::{build_cylinder, build_sphere};
    use approx::assert_relative_eq;

    #[test]
    fn sphere_mass_is_f_area() {
        let s = build_sphere(2, 1000).unwrap();
        let g = WeightedGrid::new(&s);
        let one = vec![1.0; s.len()];
        assert_relative_eq!(weighted_inner(&one, &one, &g).unwrap(), 4.0 / std::f64::consts::E, epsilon = 1e-6);
        assert_eq!(weighted_inner(&one, &vec![0.0; s.len()], &g).unwrap(), 0.0);
        assert!(weighted_inner(&one, &[1.0], &g).is_err());
    }

    #[test]
    fn constant_on_sphere() {
        let s = build_sphere(2, 200).unwrap();
        let g = WeightedGrid::new(&s);
        let lu = apply_l(&s, &g, &vec![1.0; s.len()]).unwrap();
        for v in lu {
            assert_relative_eq!(v, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn hermite_kernel_mode_on_cylinder() {
        // L(x^2 - 2) = 0 on the cylinder; the discrete residual is O(h^2 (1 + x^2))
        let worst = |m: usize| {
            let c = build_cylinder(2, 8.0, m).unwrap();
            let op = StabilityOperator::new(&c).unwrap();
            let u: Vec<f64> = c.points.iter().map(|p| p.x * p.x - 2.0).collect();
            let lu = op.apply(&u).unwrap();
            (0..c.len())
                .filter(|&i| op.grid.interior[i] && c.points[i].x.abs() < 6.0)
                .map(|i| lu[i].abs() / (1.0 + c.points[i].x.powi(2)))
                .fold(0.0, f64::max)
        };
        let (a, b) = (worst(401), worst(801));
        assert!(a < 2e-3, "{a}");
        assert!((a / b - 4.0).abs() < 0.2, "{a} {b}");
    }

    #[test]
    fn too_few_nodes() {
        let s = build_sphere(2, 16).unwrap();
        let mut t = s.clone();
        t.points.truncate(4);
        assert!(StabilityOperator::new(&t).is_err());
    }

    #[test]
    fn sphere_spectrum_is_orthonormal() {
        let s = build_sphere(2, 200).unwrap();
        let spec = eigensolve(&s, 4).unwrap();
        for j in 0..4 {
            for k in 0..4 {
                let g = weighted_inner(&spec.phis[j], &spec.phis[k], &spec.grid).unwrap();
                assert_relative_eq!(g, if j == k { 1.0 } else { 0.0 }, epsilon = 1e-8);
            }
        }
        assert!(spec.phis[0].iter().all(|v| *v > 0.0));
    }

    #[test]
    fn classification() {
        let ik = classify_lambdas(&[0.3, 1.0, 2.0], 1e-4);
        assert_eq!((ik.index, ik.kernel), (0, 0));
        let ik = classify_lambdas(&[-1.0, -0.5, 1.5e-4], 1e-4);
        assert_eq!((ik.index, ik.kernel), (2, 0));
        assert_eq!(ik.warnings.len(), 1);
    }

    #[test]
    fn relations_partition() {
        for lam in [-1.0, -0.5, 0.0, 0.5] {
            let lt = Relation::Lt.selects(lam, -0.5, 1e-4);
            let eq = Relation::Eq.selects(lam, -0.5, 1e-4);
            let gt = Relation::Gt.selects(lam, -0.5, 1e-4);
            assert_eq!(lt as u8 + eq as u8 + gt as u8, 1);
            assert_eq!(Relation::Le.selects(lam, -0.5, 1e-4), lt || eq);
            assert_eq!(Relation::Ne.selects(lam, -0.5, 1e-4), !eq);
        }
    }
}
