//! Ancient solutions emanating from a shrinker, built as fixed points of a
//! Duhamel map on spectral coefficients.

use serde::{Deserialize, Serialize};

use crate::audit::AuditReport;
use crate::error::{ensure, Error, Result};
use crate::flow::{simulate, FlowBase, GraphState, SimOptions, StopCause, Trajectory};
use crate::parallel::{map_slice, Parallelism};
use crate::spectrum::Spectrum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AncientConfig {
    pub tau_min: f64,
    pub dtau: f64,
    /// Exponential weight; `None` selects `min(-λ_I / 2, 0.5)` when all
    /// unstable modes are seeded, otherwise the midpoint of the admissible
    /// interval.
    pub delta0: Option<f64>,
    /// Admissible seeds satisfy `|a| <= eps_seed_factor * gate`, where the
    /// gate is the largest `|a|` with `||ι_-(a)||_* <= η_graph`.
    pub eps_seed_factor: f64,
    /// Relative star-norm tolerance on consecutive iterates.
    pub tol: f64,
    pub max_iter: usize,
    /// Time slices with `sup |E(u)|` below this are treated as `E = 0`: the
    /// quadratic term is then beneath the round-off of its evaluation.
    pub e_floor: f64,
    pub parallelism: Parallelism,
}

impl Default for AncientConfig {
    fn default() -> Self {
        AncientConfig {
            tau_min: -12.0,
            dtau: 0.01,
            delta0: None,
            eps_seed_factor: 1.0,
            tol: 1e-8,
            max_iter: 20,
            e_floor: 1e-13,
            parallelism: Parallelism::Parallel,
        }
    }
}

/// Seed `a` on the first `k <= I` unstable modes together with its time
/// grid. Unstable modes past `k` are integrated from `-∞` like the stable
/// ones, so `k = 1` selects the member dominated by `φ_1` as `τ -> -∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct AncientSeed {
    pub a: Vec<f64>,
    pub taus: Vec<f64>,
    pub delta0: f64,
    /// Number of seeded modes `k`.
    pub index: usize,
    pub config: AncientConfig,
}

fn norm2(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl AncientSeed {
    pub fn new(a: &[f64], base: &FlowBase, spec: &Spectrum, config: AncientConfig) -> Result<Self> {
        ensure(spec.base_digest() == base.soliton.digest(), || "spectrum was computed on a different base".into())?;
        ensure(spec.index >= 1, || "the base has no unstable modes".into())?;
        let index = a.len();
        ensure(index >= 1 && index <= spec.index, || {
            format!("seed has {index} coefficients, expected 1..={}", spec.index)
        })?;
        ensure(spec.count() > spec.index, || "spectrum needs modes beyond the unstable ones".into())?;
        ensure(config.tau_min < 0.0 && config.dtau > 0.0, || "need tau_min < 0 and dtau > 0".into())?;
        let lam_k = spec.lambdas[index - 1];
        // modes past k are integrated from -∞ against weight 2 δ_0
        let lower = (-spec.lambdas[index] / 2.0).max(0.0);
        let delta0 = config.delta0.unwrap_or(if index == spec.index {
            (-lam_k / 2.0).min(0.5)
        } else {
            lower + 0.1 * (-lam_k - lower)
        });
        ensure(delta0 > lower && delta0 < -lam_k, || {
            format!("delta0 = {delta0} must lie in ({lower}, {})", -lam_k)
        })?;
        let n = (-config.tau_min / config.dtau).round() as usize;
        ensure(n >= 2 && ((n as f64) * config.dtau + config.tau_min).abs() < 1e-9, || {
            format!("tau_min = {} is not a multiple of dtau = {}", config.tau_min, config.dtau)
        })?;
        let taus = (0..=n).map(|k| config.tau_min + k as f64 * config.dtau).collect();
        let seed = AncientSeed { a: a.to_vec(), taus, delta0, index, config };
        let eps = seed.eps_seed(base, spec)?;
        ensure(norm2(a) <= eps, || format!("|a| = {:.3e} exceeds eps_seed = {eps:.3e}", norm2(a)))?;
        Ok(seed)
    }

    /// `eps_seed_factor * η_graph / max_j ||ι_-(e_j)||_*`.
    pub fn eps_seed(&self, base: &FlowBase, spec: &Spectrum) -> Result<f64> {
        let mut worst = 0.0f64;
        for j in 0..self.index {
            let mut e = vec![0.0; self.index];
            e[j] = 1.0;
            let t = iota_table(spec, &e, &self.taus);
            worst = worst.max(star_norm(&t, base, self.delta0)?.star);
        }
        Ok(self.config.eps_seed_factor * base.eta_graph / worst)
    }
}

/// Spectral coefficients and node values on a τ grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AncientTable {
    pub taus: Vec<f64>,
    /// `coeffs[k][j]`
    pub coeffs: Vec<Vec<f64>>,
    /// `u[k][i]`
    pub u: Vec<Vec<f64>>,
}

impl AncientTable {
    fn from_coeffs(spec: &Spectrum, taus: &[f64], coeffs: Vec<Vec<f64>>) -> Self {
        let m = spec.grid.len();
        let u = coeffs
            .iter()
            .map(|c| {
                let mut v = vec![0.0; m];
                for (cj, p) in c.iter().zip(&spec.phis) {
                    if *cj != 0.0 {
                        v.iter_mut().zip(p).for_each(|(x, q)| *x += cj * q);
                    }
                }
                v
            })
            .collect();
        AncientTable { taus: taus.to_vec(), coeffs, u }
    }

    pub fn zeros(spec: &Spectrum, taus: &[f64]) -> Self {
        AncientTable::from_coeffs(spec, taus, vec![vec![0.0; spec.count()]; taus.len()])
    }

    fn sub(&self, other: &AncientTable) -> AncientTable {
        let diff = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect()).collect()
        };
        AncientTable { taus: self.taus.clone(), coeffs: diff(&self.coeffs, &other.coeffs), u: diff(&self.u, &other.u) }
    }

    pub fn scaled(&self, f: f64) -> AncientTable {
        let sc = |a: &Vec<Vec<f64>>| -> Vec<Vec<f64>> { a.iter().map(|x| x.iter().map(|v| f * v).collect()).collect() };
        AncientTable { taus: self.taus.clone(), coeffs: sc(&self.coeffs), u: sc(&self.u) }
    }
}

fn iota_table(spec: &Spectrum, a: &[f64], taus: &[f64]) -> AncientTable {
    let coeffs = taus
        .iter()
        .map(|t| {
            let mut c = vec![0.0; spec.count()];
            for (j, aj) in a.iter().enumerate() {
                c[j] = aj * (-spec.lambdas[j] * t).exp();
            }
            c
        })
        .collect();
    AncientTable::from_coeffs(spec, taus, coeffs)
}

/// `ι_-(a) = Σ_{j<=I} a_j e^{-λ_j τ} φ_j`.
pub fn iota_minus(seed: &AncientSeed, spec: &Spectrum) -> AncientTable {
    iota_table(spec, &seed.a, &seed.taus)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarNormTrack {
    pub taus: Vec<f64>,
    /// `e^{-δ_0 τ} (||u||_2^{(1)} + ||∂_τ u||_0^{(-1)})`
    pub values: Vec<f64>,
    pub star: f64,
}

/// The weighted-in-time norm `||u||_*`; `∂_τ u` uses second-order differences.
pub fn star_norm(table: &AncientTable, base: &FlowBase, delta0: f64) -> Result<StarNormTrack> {
    let n = table.taus.len();
    ensure(n >= 3, || "star norm needs at least 3 time slices".into())?;
    let m = base.len();
    let mut values = Vec::with_capacity(n);
    let mut dt = vec![0.0; m];
    for k in 0..n {
        let t = &table.taus;
        for i in 0..m {
            let u = |kk: usize| table.u[kk][i];
            dt[i] = if k == 0 {
                (-3.0 * u(0) + 4.0 * u(1) - u(2)) / (t[2] - t[0])
            } else if k == n - 1 {
                (3.0 * u(n - 1) - 4.0 * u(n - 2) + u(n - 3)) / (t[n - 1] - t[n - 3])
            } else {
                (u(k + 1) - u(k - 1)) / (t[k + 1] - t[k - 1])
            };
        }
        let v = base.graph_norm(&table.u[k])? + base.weighted_norm(&dt, 0, -1.0)?;
        values.push((-delta0 * table.taus[k]).exp() * v);
    }
    let star = values.iter().cloned().fold(0.0, f64::max);
    Ok(StarNormTrack { taus: table.taus.clone(), values, star })
}

/// `∫_0^d e^{-λ(d-s)} [h_0 (1 - s/d) + h_1 s/d] ds = w0 h_0 + w1 h_1`.
fn product_weights(lambda: f64, d: f64) -> (f64, f64) {
    let z = lambda * d;
    let (phi1, psi) = if z.abs() < 1e-4 {
        (1.0 - z / 2.0 + z * z / 6.0, 0.5 - z / 3.0 + z * z / 8.0)
    } else {
        let em = -(-z).exp_m1();
        (em / z, (em - z * (-z).exp()) / (z * z))
    };
    (d * psi, d * (phi1 - psi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSolve {
    pub coeffs: Vec<Vec<f64>>,
    /// Per mode `j >= I`: bound on the neglected `(-∞, tau_min)` contribution.
    pub tail_bounds: Vec<f64>,
}

/// Solves `u_j' = -λ_j u_j + h_j` with `u_j(0) = 0` for `j < I` and decay at
/// `-∞` for `j >= I`, by exponential trapezoid quadrature on `taus`.
pub fn solve_linear(
    spec: &Spectrum,
    index: usize,
    taus: &[f64],
    h: &[Vec<f64>],
    delta: f64,
    delta_prime: f64,
) -> Result<LinearSolve> {
    ensure(index >= 1 && index <= spec.count(), || format!("index {index} out of range"))?;
    let lam_i = spec.lambdas[index - 1];
    ensure(delta_prime > 0.0 && delta_prime < delta.min(-lam_i), || {
        format!("delta' = {delta_prime} must lie in (0, min({delta}, {}))", -lam_i)
    })?;
    ensure(h.len() == taus.len(), || "h table and tau grid differ in length".into())?;
    let n = taus.len();
    let modes = spec.count();
    let mut c = vec![vec![0.0; modes]; n];
    let mut tail_bounds = Vec::new();
    for j in 0..modes {
        let lam = spec.lambdas[j];
        if j < index {
            // u(τ_k) = e^{λ d} u(τ_{k+1}) - ∫_{τ_k}^{τ_{k+1}} e^{λ(σ-τ_k)} h
            for k in (0..n - 1).rev() {
                let d = taus[k + 1] - taus[k];
                let (w_far, w_near) = product_weights(-lam, d);
                c[k][j] = (lam * d).exp() * c[k + 1][j] - (w_near * h[k][j] + w_far * h[k + 1][j]);
            }
        } else {
            for k in 0..n - 1 {
                let d = taus[k + 1] - taus[k];
                let (w0, w1) = product_weights(lam, d);
                c[k + 1][j] = (-lam * d).exp() * c[k][j] + w0 * h[k][j] + w1 * h[k + 1][j];
            }
            let hsup = (0..n).map(|k| (-delta * taus[k]).exp() * h[k][j].abs()).fold(0.0, f64::max);
            let rate = lam + delta;
            ensure(rate > 0.0, || format!("mode {j} (lambda = {lam}) is not integrable from -inf with delta = {delta}"))?;
            tail_bounds.push((rate * taus[0]).exp() * hsup / rate);
        }
    }
    Ok(LinearSolve { coeffs: c, tail_bounds })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractStep {
    pub table: AncientTable,
    pub tail_bounds: Vec<f64>,
    /// Largest `||E(u) - Σ_j <E(u), φ_j> φ_j||_W` over the time slices.
    pub galerkin_tail: f64,
}

/// `𝒮(u; a) = ι_-(a) + solve_linear(E(u), 2δ_0, δ_0)`.
pub fn contract_once(table: &AncientTable, seed: &AncientSeed, base: &FlowBase, spec: &Spectrum) -> Result<ContractStep> {
    ensure(table.taus == seed.taus, || "table and seed use different time grids".into())?;
    let star = star_norm(table, base, seed.delta0)?.star;
    ensure(star <= base.eta_graph, || {
        format!("smallness violated: ||u||_* = {star:.3e} exceeds {:.3e}", base.eta_graph)
    })?;
    let grid = &spec.grid;
    let slices: Vec<Result<(Vec<f64>, f64)>> = map_slice(seed.config.parallelism, &table.u, |u| {
        let mut e = base.error_term(u)?;
        if e.iter().all(|v| v.abs() < seed.config.e_floor) {
            e.iter_mut().for_each(|v| *v = 0.0);
        }
        let hj = spec.coefficients(&e)?;
        let mut r = e;
        for (c, p) in hj.iter().zip(&spec.phis) {
            r.iter_mut().zip(p).for_each(|(a, b)| *a -= c * b);
        }
        Ok((hj, grid.norm(&r)))
    });
    let mut h = Vec::with_capacity(slices.len());
    let mut galerkin_tail = 0.0f64;
    for s in slices {
        let (hj, t) = s?;
        h.push(hj);
        galerkin_tail = galerkin_tail.max(t);
    }
    let lin = solve_linear(spec, seed.index, &seed.taus, &h, 2.0 * seed.delta0, seed.delta0)?;
    let iota = iota_minus(seed, spec);
    let coeffs = lin
        .coeffs
        .iter()
        .zip(&iota.coeffs)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
        .collect();
    Ok(ContractStep {
        table: AncientTable::from_coeffs(spec, &seed.taus, coeffs),
        tail_bounds: lin.tail_bounds,
        galerkin_tail,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub iterations: usize,
    /// `||u_{k+1} - u_k||_*`
    pub distances: Vec<f64>,
    pub ratios: Vec<f64>,
    /// `||𝒮(a) - ι_-(a)||_* / |a|^2`
    pub mu_fit: f64,
    pub tail_bounds: Vec<f64>,
    pub galerkin_tail: f64,
    pub tau_min: f64,
    pub dtau: f64,
    pub delta0: f64,
    pub a: Vec<f64>,
    pub star_iota: f64,
    pub star_fixed_point: f64,
}

#[derive(Debug, Clone)]
pub struct AncientSolution {
    pub table: AncientTable,
    pub trajectory: Trajectory,
    pub report: ConvergenceReport,
}

/// Iterates `𝒮(·; a)` from `ι_-(a)` to a star-norm fixed point.
pub fn build_ancient(seed: &AncientSeed, base: &FlowBase, spec: &Spectrum) -> Result<AncientSolution> {
    let iota = iota_minus(seed, spec);
    let star_iota = star_norm(&iota, base, seed.delta0)?.star;
    let mut u = iota.clone();
    let mut distances = Vec::new();
    for it in 1..=seed.config.max_iter {
        let step = contract_once(&u, seed, base, spec)?;
        let d = star_norm(&step.table.sub(&u), base, seed.delta0)?.star;
        distances.push(d);
        u = step.table.clone();
        if d <= seed.config.tol * star_iota {
            let star_fixed = star_norm(&u, base, seed.delta0)?.star;
            let diff = star_norm(&u.sub(&iota), base, seed.delta0)?.star;
            let a2 = seed.a.iter().map(|v| v * v).sum::<f64>();
            let ratios = distances.windows(2).map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 }).collect();
            let report = ConvergenceReport {
                iterations: it,
                distances,
                ratios,
                mu_fit: if a2 > 0.0 { diff / a2 } else { 0.0 },
                tail_bounds: step.tail_bounds,
                galerkin_tail: step.galerkin_tail,
                tau_min: seed.config.tau_min,
                dtau: seed.config.dtau,
                delta0: seed.delta0,
                a: seed.a.clone(),
                star_iota,
                star_fixed_point: star_fixed,
            };
            let states = u
                .u
                .iter()
                .zip(&u.taus)
                .map(|(v, t)| GraphState { tau: *t, u: v.clone(), side: 0 })
                .collect();
            let trajectory = Trajectory {
                base_digest: base.soliton.digest(),
                dtau: seed.config.dtau,
                scheme: "duhamel fixed point".into(),
                states,
                stop: StopCause::SpanEnd,
            };
            return Ok(AncientSolution { table: u, trajectory, report });
        }
    }
    Err(Error::numerical(format!(
        "no contraction to tolerance {:.1e} after {} iterations; distances {distances:?}",
        seed.config.tol, seed.config.max_iter
    )))
}

/// Time-steps the fixed point forward from its `tau_min` slice with step
/// `dtau / substeps` and compares on the fixed-point grid in star norm.
pub fn forward_consistency(sol: &AncientSolution, base: &FlowBase, delta0: f64, substeps: usize) -> Result<AuditReport> {
    ensure(substeps >= 1, || "substeps must be positive".into())?;
    let taus = &sol.table.taus;
    let h = (taus[1] - taus[0]) / substeps as f64;
    let traj = simulate(base, &sol.table.u[0], [taus[0], taus[taus.len() - 1]], h, 0, SimOptions::default())?;
    let mut rep = AuditReport::new("ancient_forward_consistency");
    if traj.states.len() != (taus.len() - 1) * substeps + 1 {
        rep.check_flag("simulation_completed", false, format!("stopped early: {:?}", traj.stop));
        return Ok(rep);
    }
    let sim: Vec<Vec<f64>> = (0..taus.len()).map(|k| traj.states[k * substeps].u.clone()).collect();
    let diff = AncientTable {
        taus: taus.clone(),
        coeffs: Vec::new(),
        u: sim.iter().zip(&sol.table.u).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect()).collect(),
    };
    let d = star_norm(&diff, base, delta0)?.star;
    let s = star_norm(&sol.table, base, delta0)?.star;
    let rel = if s > 0.0 { d / s } else { d };
    rep.constant("star_difference", d);
    rep.constant("star_fixed_point", s);
    rep.check_le("relative_star_difference", rel, 0.05);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soliton::build_sphere;
    use crate::spectrum::eigensolve;

    fn sphere() -> (FlowBase, Spectrum) {
        let s = build_sphere(2, 200).unwrap();
        (FlowBase::new(&s).unwrap(), eigensolve(&s, 8).unwrap())
    }

    fn config() -> AncientConfig {
        AncientConfig { tau_min: -6.0, dtau: 0.02, parallelism: Parallelism::Sequential, ..Default::default() }
    }

    #[test]
    fn product_weights_match_quadrature() {
        for (lam, d) in [(0.0, 0.1), (3.0, 0.1), (-1.0, 0.05), (1e-6, 0.2), (500.0, 0.01)] {
            let (w0, w1) = product_weights(lam, d);
            let k = 20000;
            let mut a = 0.0;
            let mut b = 0.0;
            for i in 0..k {
                let s = (i as f64 + 0.5) * d / k as f64;
                let e = (-lam * (d - s)).exp() * d / k as f64;
                a += e * (1.0 - s / d);
                b += e * s / d;
            }
            assert!((w0 - a).abs() < 1e-8 * d && (w1 - b).abs() < 1e-8 * d, "{lam} {w0} {a} {w1} {b}");
        }
    }

    #[test]
    fn zero_seed_gives_zero() {
        let (base, spec) = sphere();
        let seed = AncientSeed::new(&[0.0, 0.0], &base, &spec, config()).unwrap();
        assert!(iota_minus(&seed, &spec).u.iter().flatten().all(|v| *v == 0.0));
        let sol = build_ancient(&seed, &base, &spec).unwrap();
        assert_eq!(sol.report.iterations, 1);
        assert!(sol.table.u.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn iota_on_sphere() {
        let (base, spec) = sphere();
        let seed = AncientSeed::new(&[1e-3, 0.0], &base, &spec, config()).unwrap();
        let t = iota_minus(&seed, &spec);
        let phi = spec.phis[0][7];
        for (k, tau) in t.taus.iter().enumerate() {
            assert!((t.u[k][7] - 1e-3 * tau.exp() * phi).abs() < 1e-15);
        }
        let sn = star_norm(&t, &base, 0.5).unwrap();
        let kmax = sn.values.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(kmax, t.taus.len() - 1);
        let s2 = star_norm(&t.scaled(2.0), &base, 0.5).unwrap();
        assert!((s2.star - 2.0 * sn.star).abs() < 1e-15 * sn.star.max(1.0) * 4.0);
    }

    #[test]
    fn seed_validation() {
        let (base, spec) = sphere();
        assert!(AncientSeed::new(&[1.0, 0.0], &base, &spec, config()).is_err());
        assert!(AncientSeed::new(&[1e-3, 0.0, 0.0], &base, &spec, config()).is_err());
        let one = AncientSeed::new(&[1e-3], &base, &spec, config()).unwrap();
        assert!(one.delta0 > 0.25 && one.delta0 < 1.0);
        let seed = AncientSeed::new(&[0.0, 0.0], &base, &spec, config()).unwrap();
        let h = vec![vec![0.0; spec.count()]; seed.taus.len()];
        assert!(solve_linear(&spec, 2, &seed.taus, &h, 1.0, 0.6).is_err());
        let z = solve_linear(&spec, 2, &seed.taus, &h, 1.0, 0.25).unwrap();
        assert!(z.coeffs.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn single_mode_convolution() {
        let (base, spec) = sphere();
        let cfg = AncientConfig { tau_min: -20.0, dtau: 0.01, ..config() };
        let seed = AncientSeed::new(&[0.0, 0.0], &base, &spec, cfg).unwrap();
        let j = 3;
        let d0 = 0.25;
        let h: Vec<Vec<f64>> = seed
            .taus
            .iter()
            .map(|t| {
                let mut v = vec![0.0; spec.count()];
                v[j] = (2.0 * d0 * t).exp();
                v
            })
            .collect();
        let sol = solve_linear(&spec, 2, &seed.taus, &h, 2.0 * d0, d0).unwrap();
        for (k, t) in seed.taus.iter().enumerate().skip(1000) {
            let exact = (2.0 * d0 * t).exp() / (spec.lambdas[j] + 2.0 * d0);
            assert!((sol.coeffs[k][j] - exact).abs() < 1e-5 * exact, "{t} {} {exact}", sol.coeffs[k][j]);
        }
    }

    #[test]
    fn radial_fixed_point() {
        let (base, spec) = sphere();
        let seed = AncientSeed::new(&[1e-3, 0.0], &base, &spec, config()).unwrap();
        let sol = build_ancient(&seed, &base, &spec).unwrap();
        assert!(sol.report.iterations <= 6, "{:?}", sol.report);
        // ρ(0) - 2 is fixed by the terminal condition on φ_1
        let f = (4.0 / std::f64::consts::E).sqrt();
        let rho0 = 2.0 + 1e-3 / f;
        let c = rho0 * rho0 - 4.0;
        for (k, t) in sol.table.taus.iter().enumerate().step_by(50) {
            let exact = (4.0 + c * t.exp()).sqrt() - 2.0;
            assert!((sol.table.u[k][100] / exact - 1.0).abs() < 1e-2, "{t}");
        }
    }
}
