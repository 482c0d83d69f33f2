use std::path::Path;

use serde::Serialize;
use shrinkerlab::ancient::{build_ancient, forward_consistency, star_norm, AncientConfig, AncientSeed, ConvergenceReport};
use shrinkerlab::audit::{AuditReport, AuditStatus};
use shrinkerlab::avoidance::{
    avoidance_audit, frankel_probe, k_operator_check, radial_distance, AvoidanceOptions, AvoidanceReport,
    AvoidanceWindow, ConformalField, DistanceOptions, FrankelOutcome,
};
use shrinkerlab::density::{
    density_ratio, entropy, f_area, huisken_audit, huisken_table, is_model_shrinker, EntropyResult, EntropySearch,
    FlowSlice, HuiskenOptions, SpacetimePoint, SurfaceFlow,
};
use shrinkerlab::flow::{shrinker_mean_convexity, simulate, FlowBase, SimOptions, TimeMap, Trajectory, TrajectorySummary};
use shrinkerlab::io::{
    density_csv, distance_csv, eigenfunction_csv, mode_track_csv, trajectory_csv, CsvTable, Manifest, OutputDir,
};
use shrinkerlab::modes::{
    dominant_mode_fit, family_thresholds, merle_zaag_audit, one_sided_decay_audit, refinement_audit, track_family,
    DecayOptions, DominantModeFit, FitOptions, ModeTrack, MzOptions,
};
use shrinkerlab::parallel::Parallelism;
use shrinkerlab::soliton::{
    build_cylinder, build_plane, build_round_sphere, build_sphere, conical_end, find_expander, find_torus,
    DecayReport, Orientation, ProfileFile, SolitonKind, SolitonMode, SymmetricSoliton, Topology, TorusConfig,
};
use shrinkerlab::spectrum::{
    eigensolve, selfadjoint_check, structural_residuals, Spectrum, SpectrumSummary, StructuralResiduals,
};
use shrinkerlab::{Error, Result};

use crate::config::{
    AncientParams, AvoidParams, Base, BaseSpec, DensityBase, DensityParams, FlowParams, Format, FrankelCase,
    ModesParams, Params, Scenario, SolitonBase, SolitonParams, SpectrumParams,
};

fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

/// Output directory plus the audits collected during one run.
pub struct Run {
    out: OutputDir,
    formats: Vec<Format>,
    pub audits: Vec<AuditReport>,
}

impl Run {
    pub fn new(root: &Path, formats: Vec<Format>) -> Result<Self> {
        Ok(Run { out: OutputDir::create(root)?, formats, audits: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.out.root
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        if self.formats.contains(&Format::Json) {
            self.out.write_json(name, value)?;
        }
        Ok(())
    }

    /// Written regardless of the requested formats.
    pub fn json_always<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.out.write_json(name, value)
    }

    pub fn csv(&mut self, name: &str, table: &CsvTable) -> Result<()> {
        if self.formats.contains(&Format::Csv) {
            self.out.write_csv(name, table)?;
        }
        Ok(())
    }

    pub fn audit(&mut self, report: AuditReport) {
        self.audits.push(report);
    }

    pub fn passed(&self) -> bool {
        self.audits.iter().all(|a| a.status != AuditStatus::Fail)
    }

    pub fn finish(self, mut manifest: Manifest) -> Result<Manifest> {
        manifest.passed = self.passed();
        manifest.audits = self.audits;
        self.out.finish(manifest)
    }
}

pub fn execute(params: &Params, seed: u64, run: &mut Run) -> Result<()> {
    match params {
        Params::Soliton(p) => soliton(p, run),
        Params::Spectrum(p) => spectrum(p, seed, run),
        Params::Flow(p) => flow(p, run),
        Params::Modes(p) => modes(p, run),
        Params::Ancient(p) => ancient(p, run),
        Params::Density(p) => density(p, run),
        Params::Avoid(p) => avoid(p, run),
        Params::Report(p) => crate::report::report(p, run),
    }
}

fn linspace(a: f64, b: f64, k: usize) -> Vec<f64> {
    (0..=k).map(|i| a + (b - a) * i as f64 / k as f64).collect()
}

// ---------------------------------------------------------------------------
// soliton

fn profile_csv(s: &SymmetricSoliton) -> Result<CsvTable> {
    let f = ProfileFile::from_soliton(s);
    let mut t = CsvTable::new(&["s", "x", "r", "theta", "H", "A2", "xdotnu"]);
    for p in &f.points {
        t.push(vec![p.s.into(), p.x.into(), p.r.into(), p.theta.into(), p.h.into(), p.a2.into(), p.xdotnu.into()])?;
    }
    Ok(t)
}

#[derive(Serialize)]
struct SolitonSummary {
    kind: SolitonBase,
    n: usize,
    nodes: usize,
    digest: String,
    residual_sup: f64,
    tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    coarse_nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual_coarse: Option<f64>,
    /// `log2` of the residual ratio under grid doubling; absent when the
    /// residual is at round-off level.
    #[serde(skip_serializing_if = "Option::is_none")]
    observed_order: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    decay: Option<DecayReport>,
}

fn write_profile(run: &mut Run, s: &SymmetricSoliton) -> Result<()> {
    run.json("profile.json", &ProfileFile::from_soliton(s))?;
    run.csv("profile.csv", &profile_csv(s)?)
}

fn soliton(p: &SolitonParams, run: &mut Run) -> Result<()> {
    let default_tol = match p.base {
        SolitonBase::Sphere => 1e-8,
        SolitonBase::Cylinder => 1e-10,
        _ => 1e-3,
    };
    let tol = p.tol.unwrap_or(default_tol);
    let mut audit = AuditReport::new("soliton_residual");
    let mut summary = SolitonSummary {
        kind: p.base,
        n: p.n,
        nodes: 0,
        digest: String::new(),
        residual_sup: 0.0,
        tol,
        coarse_nodes: None,
        residual_coarse: None,
        observed_order: None,
        decay: None,
    };
    let s = match p.base {
        SolitonBase::ConicalEnd => {
            let end = conical_end(p.n, p.cone_slope, p.r0, p.r1, p.ds)?;
            let mut t = CsvTable::new(&["rho", "w", "dw"]);
            for i in 0..end.rho.len() {
                t.push(vec![end.rho[i].into(), end.w[i].into(), end.dw[i].into()])?;
            }
            run.csv("decay.csv", &t)?;
            let mut d = AuditReport::new("conical_decay");
            d.constant("slope_w", end.report.slope_w);
            d.constant("slope_dw", end.report.slope_dw);
            d.check_le("slope_w_near_minus_one", (end.report.slope_w + 1.0).abs(), p.slope_tol_w);
            d.check_le("slope_dw_near_minus_two", (end.report.slope_dw + 2.0).abs(), p.slope_tol_dw);
            run.audit(d);
            summary.decay = Some(end.report.clone());
            end.profile
        }
        SolitonBase::Expander => find_expander(p.n, p.cone_slope, p.ds, p.s_max)?,
        SolitonBase::Sphere | SolitonBase::Cylinder | SolitonBase::Torus => {
            let base = match p.base {
                SolitonBase::Sphere => Base::Sphere,
                SolitonBase::Cylinder => Base::Cylinder,
                _ => Base::Torus,
            };
            let spec = BaseSpec { base, n: p.n, m: p.m, x_max: p.x_max, torus_bracket: [p.torus_lo, p.torus_hi], torus_tol: tol };
            let s = spec.build()?;
            let mc = if base == Base::Torus { (p.m / 2 + 1) & !1 } else { p.m / 2 };
            // the coarse grid only measures the order; its residual is not audited
            let coarse = BaseSpec { torus_tol: f64::MAX, ..spec }.build_at(mc)?;
            let (rf, rc) = (s.residual_sup(SolitonMode::Shrinker), coarse.residual_sup(SolitonMode::Shrinker));
            summary.coarse_nodes = Some(coarse.len());
            summary.residual_coarse = Some(rc);
            if rf > 1e-12 {
                let order = (rc / rf).log2();
                summary.observed_order = Some(order);
                audit.constant("observed_order", order);
            }
            s
        }
    };
    let mode = if p.base == SolitonBase::Expander { SolitonMode::Expander } else { SolitonMode::Shrinker };
    let res = s.residual_sup(mode);
    summary.nodes = s.len();
    summary.digest = s.digest();
    summary.residual_sup = res;
    audit.check_le("residual_sup", res, tol);
    run.audit(audit);
    write_profile(run, &s)?;
    run.json("summary.json", &summary)
}

// ---------------------------------------------------------------------------
// spectrum

#[derive(Serialize)]
struct SpectrumOut {
    #[serde(flatten)]
    summary: SpectrumSummary,
    base: Base,
    n: usize,
    m: usize,
    structural: StructuralResiduals,
    lambda1_margin: f64,
}

fn interior_sign_min(spec: &Spectrum) -> f64 {
    let phi = &spec.phis[0];
    let idx = spec.grid.interior_indices();
    let sign = idx.iter().map(|&i| phi[i]).find(|v| *v != 0.0).unwrap_or(1.0).signum();
    idx.iter().map(|&i| sign * phi[i]).fold(f64::INFINITY, f64::min)
}

fn spectrum(p: &SpectrumParams, seed: u64, run: &mut Run) -> Result<()> {
    let bs = p.base_spec();
    let s = bs.build()?;
    let mut spec = eigensolve(&s, p.count)?.with_kappa(p.kappa);
    if p.refine {
        let fine = bs.build_at(2 * p.m)?;
        spec = spec.with_refinement(&eigensolve(&fine, p.count)?)?;
    }
    run.audit(selfadjoint_check(&s, p.trials, seed)?);

    let st = structural_residuals(&s)?;
    let mut a = AuditReport::new("structural_eigenfunctions");
    a.check_le("mean_curvature", st.mean_curvature, p.structural_tol);
    a.check_le("axial_translation", st.axial_translation, p.structural_tol);
    run.audit(a);

    let mut a = AuditReport::new("first_eigenfunction_sign");
    let min = interior_sign_min(&spec);
    a.constant("min_signed_value", min);
    a.check_gt("one_signed", min, 0.0);
    run.audit(a);

    let lam1 = spec.lambdas[0];
    let mut a = AuditReport::new("first_eigenvalue");
    a.constant("lambda1", lam1);
    a.constant("margin", lam1 + 1.0);
    if p.base == Base::Torus {
        a.check_lt("below_minus_one", lam1, -1.0);
    } else {
        a.note("the strict bound is checked on the torus only; round shrinkers sit at -1");
    }
    run.audit(a);

    let out = SpectrumOut { summary: spec.summary(), base: p.base, n: p.n, m: p.m, structural: st, lambda1_margin: lam1 + 1.0 };
    run.json("spectrum.json", &out)?;
    run.csv("eigenfunctions.csv", &eigenfunction_csv(&spec)?)
}

// ---------------------------------------------------------------------------
// flows

#[derive(Debug, Clone, Copy, PartialEq)]
enum InitialKind {
    Const,
    Phi1,
    Tilt,
    Gauss,
}

fn parse_u0(text: &str) -> Result<(InitialKind, f64)> {
    let (kind, amp) =
        text.split_once(':').ok_or_else(|| invalid(format!("initial data `{text}` is not of the form kind:amplitude")))?;
    let amp: f64 = amp.trim().parse().map_err(|_| invalid(format!("amplitude `{amp}` is not a number")))?;
    if !amp.is_finite() {
        return Err(invalid("amplitude must be finite"));
    }
    let kind = match kind.trim() {
        "const" => InitialKind::Const,
        "phi1" => InitialKind::Phi1,
        "tilt" => InitialKind::Tilt,
        "gauss" => InitialKind::Gauss,
        other => return Err(invalid(format!("unknown initial data `{other}`; use const, phi1, tilt or gauss"))),
    };
    Ok((kind, amp))
}

/// Initial graph function and its side (`±1` if one-signed on the interior).
fn initial_data(text: &str, base: &FlowBase, spec: Option<&Spectrum>) -> Result<(Vec<f64>, i8, InitialKind, f64)> {
    let (kind, amp) = parse_u0(text)?;
    let pts = &base.soliton.points;
    let u: Vec<f64> = match kind {
        InitialKind::Const => vec![amp; pts.len()],
        InitialKind::Tilt => pts.iter().map(|q| amp * (1.0 + 0.25 * q.x)).collect(),
        InitialKind::Gauss => pts.iter().map(|q| amp * (-q.x * q.x / 8.0).exp()).collect(),
        InitialKind::Phi1 => {
            let owned;
            let spec = match spec {
                Some(s) => s,
                None => {
                    owned = eigensolve(&base.soliton, 1)?;
                    &owned
                }
            };
            let phi = &spec.phis[0];
            let sup = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let sign = spec.grid.interior_indices().iter().map(|&i| phi[i]).find(|v| *v != 0.0).unwrap_or(1.0).signum();
            phi.iter().map(|v| amp * sign * v / sup).collect()
        }
    };
    let interior: Vec<f64> = (0..u.len()).filter(|&i| base.is_interior(i)).map(|i| u[i]).collect();
    let side = if interior.iter().all(|v| *v > 0.0) {
        1
    } else if interior.iter().all(|v| *v < 0.0) {
        -1
    } else {
        0
    };
    Ok((u, side, kind, amp))
}

fn strided(traj: &Trajectory, stride: usize) -> Trajectory {
    let last = traj.states.len() - 1;
    let states = traj.states.iter().enumerate().filter(|(k, _)| k % stride == 0 || *k == last).map(|(_, s)| s.clone()).collect();
    Trajectory { states, ..traj.clone() }
}

#[derive(Serialize)]
struct OracleSummary {
    /// `rho(τ) = sqrt(2n + C e^{τ - τ0})`
    c: f64,
    states_compared: usize,
    max_rel_error: f64,
    sup_window: f64,
}

#[derive(Serialize)]
struct FlowSummary {
    u0: String,
    side: i8,
    trajectory: TrajectorySummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<OracleSummary>,
}

fn radial_oracle(traj: &Trajectory, base: &FlowBase, amp: f64, tau0: f64, p: &FlowParams) -> (AuditReport, OracleSummary) {
    let r2 = 2.0 * base.n() as f64;
    let rho0 = r2.sqrt();
    let c = (rho0 + amp).powi(2) - r2;
    let mut worst = 0.0f64;
    let mut count = 0;
    for st in &traj.states {
        let sup = st.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if sup > p.oracle_sup {
            continue;
        }
        let exact = (r2 + c * (st.tau - tau0).exp()).sqrt() - rho0;
        for (i, v) in st.u.iter().enumerate() {
            if base.is_interior(i) {
                worst = worst.max((v / exact - 1.0).abs());
            }
        }
        count += 1;
    }
    let mut a = AuditReport::new("radial_oracle");
    a.constant("C", c);
    a.constant("states_compared", count as f64);
    a.constant("max_rel_error", worst);
    a.check_ge("states_compared", count as f64, 2.0);
    a.check_le("max_rel_error", worst, p.oracle_tol);
    (a, OracleSummary { c, states_compared: count, max_rel_error: worst, sup_window: p.oracle_sup })
}

fn flow(p: &FlowParams, run: &mut Run) -> Result<()> {
    if p.stride == 0 {
        return Err(invalid("stride must be positive"));
    }
    let s = p.base_spec().build()?;
    let base = FlowBase::new(&s)?;
    let (u0, side, kind, amp) = initial_data(&p.u0, &base, None)?;
    let traj = simulate(&base, &u0, [p.tau0, p.tau0 + p.span], p.dtau, side, SimOptions { sup_limit: p.sup_limit })?;
    let map = TimeMap::default();
    run.audit(shrinker_mean_convexity(&traj, &base, map)?.audit);
    let oracle = if p.base == Base::Sphere && kind == InitialKind::Const {
        let (a, o) = radial_oracle(&traj, &base, amp, p.tau0, p);
        run.audit(a);
        Some(o)
    } else {
        run.audit(AuditReport::not_applicable("radial_oracle", "needs a sphere base and constant initial data"));
        None
    };
    let summary = FlowSummary { u0: p.u0.clone(), side, trajectory: traj.summary(&base)?, oracle };
    run.json("summary.json", &summary)?;
    run.csv("trajectory.csv", &trajectory_csv(&strided(&traj, p.stride), &base, map)?)
}

// ---------------------------------------------------------------------------
// modes

struct ModeRun {
    base: FlowBase,
    spec: Spectrum,
    traj: Trajectory,
    family: Vec<ModeTrack>,
}

fn mode_run(p: &ModesParams, m: usize, dtau: f64) -> Result<ModeRun> {
    let s = p.base_spec().build_at(m)?;
    let base = FlowBase::new(&s)?;
    let spec = eigensolve(&s, p.count)?;
    let (u0, side, _, _) = initial_data(&p.u0, &base, Some(&spec))?;
    let traj = simulate(&base, &u0, [0.0, p.span], dtau, side, SimOptions { sup_limit: Some(p.sup_limit) })?;
    let family = track_family(&traj, &base, &spec, Parallelism::default())?;
    Ok(ModeRun { base, spec, traj, family })
}

#[derive(Serialize)]
struct ModesOut {
    thresholds: Vec<f64>,
    dominant: DominantModeFit,
    tracked_threshold: f64,
    steps: usize,
}

fn modes(p: &ModesParams, run: &mut Run) -> Result<()> {
    let mz_opts = MzOptions { delta0: p.delta0, c_max: p.c_max, ..Default::default() };
    let coarse = mode_run(p, p.m, p.dtau)?;
    let fit = dominant_mode_fit(&coarse.family, &FitOptions { delta0: p.delta0, ..Default::default() })?;
    let mu = fit.mu_star.unwrap_or(coarse.spec.lambdas[0]);
    let k = coarse.family.iter().position(|t| t.mu == mu).unwrap_or(0);
    let mz = merle_zaag_audit(&coarse.family[k], &mz_opts);
    run.audit(fit.audit.clone());
    let decay =
        one_sided_decay_audit(&coarse.traj, &coarse.base, &coarse.spec, &DecayOptions { delta0: p.delta0, ..Default::default() })?;
    run.audit(decay);
    run.audit(mz.clone());
    if p.refine {
        let fine = mode_run(p, 2 * p.m, p.dtau / 2.0)?;
        let kf = k.min(fine.family.len() - 1);
        let mz_fine = merle_zaag_audit(&fine.family[kf], &mz_opts);
        run.audit(refinement_audit(&mz, &mz_fine, p.drift_tol));
    }
    for (j, t) in coarse.family.iter().enumerate() {
        run.csv(&format!("modes_{j}.csv"), &mode_track_csv(t)?)?;
    }
    let out = ModesOut {
        thresholds: family_thresholds(&coarse.spec),
        dominant: fit,
        tracked_threshold: mu,
        steps: coarse.traj.states.len() - 1,
    };
    run.json("fits.json", &out)
}

// ---------------------------------------------------------------------------
// ancient

#[derive(Serialize)]
struct AncientOut {
    report: ConvergenceReport,
    eps_seed: f64,
    /// `(|a|, μ)` for the seed and each halving.
    mu_fits: Vec<[f64; 2]>,
}

fn ancient(p: &AncientParams, run: &mut Run) -> Result<()> {
    let s = p.base_spec().build()?;
    let base = FlowBase::new(&s)?;
    let spec = eigensolve(&s, p.count)?;
    let cfg = AncientConfig {
        tau_min: p.tau_min,
        dtau: p.dtau,
        delta0: p.delta0,
        eps_seed_factor: p.eps_seed_factor,
        tol: p.tol,
        max_iter: p.max_iter,
        e_floor: p.e_floor,
        parallelism: Parallelism::default(),
    };
    let norm = |a: &[f64]| a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let seed = AncientSeed::new(&p.a, &base, &spec, cfg)?;
    let sol = build_ancient(&seed, &base, &spec)?;
    let r = &sol.report;

    let mut a = AuditReport::new("contraction");
    let worst = r.ratios.iter().skip(1).cloned().fold(0.0, f64::max);
    a.constant("iterations", r.iterations as f64);
    a.constant("max_ratio_after_first", worst);
    a.constant("mu_fit", r.mu_fit);
    a.check_le("iterations", r.iterations as f64, p.iteration_bound as f64);
    a.check_le("ratio_after_first", worst, p.ratio_bound);
    run.audit(a);

    let mut mu_fits = vec![[norm(&p.a), r.mu_fit]];
    for k in 1..=p.halvings {
        let f = 0.5f64.powi(k as i32);
        let ak: Vec<f64> = p.a.iter().map(|v| v * f).collect();
        let sk = AncientSeed::new(&ak, &base, &spec, cfg)?;
        mu_fits.push([norm(&ak), build_ancient(&sk, &base, &spec)?.report.mu_fit]);
    }
    if p.halvings > 0 {
        let mut a = AuditReport::new("quadratic_fit");
        let drift = mu_fits.windows(2).map(|w| (w[1][1] / w[0][1] - 1.0).abs()).fold(0.0, f64::max);
        a.constant("max_mu_drift", drift);
        a.check_lt("mu_drift", drift, p.mu_drift_tol);
        run.audit(a);
    }
    if p.forward_check {
        run.audit(forward_consistency(&sol, &base, seed.delta0, p.substeps)?);
    }

    let track = star_norm(&sol.table, &base, seed.delta0)?;
    let mut t = CsvTable::new(&["tau", "weighted_norm"]);
    for (tau, v) in track.taus.iter().zip(&track.values) {
        t.push(vec![(*tau).into(), (*v).into()])?;
    }
    run.csv("star_norm.csv", &t)?;
    let mut t = CsvTable::new(&["tau", "mode", "coefficient"]);
    for (tau, c) in sol.table.taus.iter().zip(&sol.table.coeffs) {
        for (j, v) in c.iter().enumerate() {
            t.push(vec![(*tau).into(), j.into(), (*v).into()])?;
        }
    }
    run.csv("coefficients.csv", &t)?;
    let out = AncientOut { report: sol.report.clone(), eps_seed: seed.eps_seed(&base, &spec)?, mu_fits };
    run.json("convergence.json", &out)
}

// ---------------------------------------------------------------------------
// density

#[derive(Serialize)]
struct DensityOut {
    entropy: EntropyResult,
    f_area: f64,
    /// `(r, Θ((0, 0), r))`
    theta: Vec<[f64; 2]>,
}

fn density(p: &DensityParams, run: &mut Run) -> Result<()> {
    if p.r_count < 2 || !(0.0 < p.r_min && p.r_min < p.r_max) {
        return Err(invalid("need r_count >= 2 and 0 < r_min < r_max"));
    }
    let s = match p.base {
        DensityBase::Sphere => build_sphere(p.n, p.m)?,
        DensityBase::Cylinder => build_cylinder(p.n, p.x_max, p.m)?,
        DensityBase::Plane => build_plane(p.n, 0.0, p.plane_radius, p.m)?,
    };
    let fa = f_area(&s);
    let search = EntropySearch {
        n_x0: p.n_x0,
        n_t0: p.n_t0,
        t0_min: p.t0_min,
        t0_max: p.t0_max,
        rounds: p.rounds,
        ..Default::default()
    };
    let ent = entropy(&s, &search)?;
    let mut a = AuditReport::new("entropy");
    a.constant("value", ent.value);
    a.constant("x0", ent.x0);
    a.constant("t0", ent.t0);
    a.constant("f_area", fa);
    a.check_ge("not_below_f_area", ent.value - fa, -1e-9 * fa);
    if is_model_shrinker(&s) {
        a.check_le("argmax_axial", ent.x0.abs(), ent.grid_cell[0]);
        a.check_le("argmax_scale", (ent.t0 - 1.0).abs(), ent.grid_cell[1]);
    }
    run.audit(a);

    let rs = linspace(p.r_min, p.r_max, p.r_count - 1);
    let mut times: Vec<f64> = rs.iter().map(|r| -r * r).collect();
    times.reverse();
    let flow = SurfaceFlow::self_similar(&s, &times)?;
    let origin = SpacetimePoint::ORIGIN;
    let theta: Vec<[f64; 2]> = rs.iter().map(|&r| Ok([r, density_ratio(&flow, &origin, r)?])).collect::<Result<_>>()?;
    let rows = huisken_table(&flow, &origin);
    let (lo, hi) = theta.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), t| (l.min(t[1]), h.max(t[1])));
    let off = theta.iter().map(|t| (t[1] - fa).abs()).fold(0.0, f64::max);
    let sup = rows.iter().map(|r| r.integrand_sup).fold(0.0, f64::max);
    let mut a = AuditReport::new("gaussian_density");
    a.check_le("theta_spread", hi - lo, p.theta_tol);
    a.check_le("theta_equals_f_area", off, p.theta_tol);
    a.check_le("dissipation_integrand_sup", sup, p.integrand_tol);
    run.audit(a);
    run.audit(huisken_audit(&flow, &origin, &HuiskenOptions { slack: p.slack, ..Default::default() }));

    run.csv("density.csv", &density_csv(&rows)?)?;
    run.json("entropy.json", &DensityOut { entropy: ent, f_area: fa, theta })
}

// ---------------------------------------------------------------------------
// avoidance

fn shifted_sphere(n: usize, radius: f64, dx: f64, m: usize) -> Result<SymmetricSoliton> {
    let s = build_round_sphere(n, radius, m)?;
    let pos: Vec<[f64; 2]> = s.points.iter().map(|q| [q.x + dx, q.r]).collect();
    SymmetricSoliton::from_positions(SolitonKind::Custom, n, &pos, Topology::SPHERE, Orientation::Right)
}

fn sphere_flow(n: usize, r: f64, a: f64, dx: f64, times: &[f64], m: usize) -> Result<SurfaceFlow> {
    let slices = times
        .iter()
        .map(|&t| {
            let r2 = r * r - 2.0 * n as f64 * (t - a);
            if r2 <= 0.0 {
                return Err(invalid(format!("sphere of radius {r} has vanished by t = {t}")));
            }
            Ok(FlowSlice { t, surface: shifted_sphere(n, r2.sqrt(), dx, m)? })
        })
        .collect::<Result<_>>()?;
    SurfaceFlow::new(slices)
}

#[derive(Serialize)]
struct ClosedForm {
    d: f64,
    closed_form: f64,
}

#[derive(Serialize)]
struct AvoidOut {
    report: AvoidanceReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    closed_form: Option<ClosedForm>,
}

fn avoid(p: &AvoidParams, run: &mut Run) -> Result<()> {
    if p.steps == 0 {
        return Err(invalid("steps must be positive"));
    }
    let times = linspace(p.a, p.b, p.steps);
    let (fa, fb) = match p.scenario {
        Scenario::Concentric => {
            (sphere_flow(p.n, p.r_a, p.a, 0.0, &times, p.m)?, sphere_flow(p.n, p.r_b, p.a, 0.0, &times, p.m)?)
        }
        Scenario::Offset => {
            (sphere_flow(p.n, p.r_a, p.a, -p.offset, &times, p.m)?, sphere_flow(p.n, p.r_a, p.a, p.offset, &times, p.m)?)
        }
    };
    let window = AvoidanceWindow { a: p.a, b: p.b, radius: p.radius, gamma: p.gamma, x0: 0.0 };
    let opts = AvoidanceOptions {
        distance: DistanceOptions { cells: p.cells, ..Default::default() },
        tol: p.tol,
        ..Default::default()
    };
    let report = avoidance_audit(&fa, &fb, &window, &opts)?;
    run.audit(report.audit.clone());

    let closed_form = if p.scenario == Scenario::Concentric {
        let field = ConformalField::new(p.n, p.radius, 0.0, 0.0, p.a)?;
        let d = radial_distance(&field, p.a, p.r_a, p.r_b);
        let c = p.radius;
        let g = |s: f64| ((c + s) / (c - s)).ln() / (2.0 * c);
        let exact = g(p.r_b.max(p.r_a)) - g(p.r_a.min(p.r_b));
        let mut a = AuditReport::new("closed_form_distance");
        a.constant("d", d);
        a.constant("closed_form", exact);
        a.check_le("abs_error", (d - exact).abs(), p.closed_form_tol);
        run.audit(a);
        Some(ClosedForm { d, closed_form: exact })
    } else {
        None
    };

    let field = ConformalField::new(p.n, p.radius, p.alpha, 0.0, p.a)?;
    run.audit(k_operator_check(&field, p.samples)?);

    if p.frankel != FrankelCase::None {
        let sphere = build_sphere(p.n, p.frankel_m)?;
        let other = match p.frankel {
            FrankelCase::SphereCylinder => build_cylinder(p.n, 8.0, p.frankel_m)?,
            _ => find_torus(p.n, [3.2, 3.4], 1e-3, &TorusConfig { m: 4 * p.frankel_m, ..Default::default() })?,
        };
        let outcome = frankel_probe(&sphere, &other);
        let mut a = AuditReport::new("frankel");
        if let Some(w) = outcome.witness() {
            a.constant("x", w.x);
            a.constant("r", w.r);
            run.json("witness.json", &w)?;
        } else if let FrankelOutcome::Gap { min_gap, .. } = outcome {
            a.constant("min_gap", min_gap);
            run.json("witness.json", &outcome)?;
        }
        a.check_flag("witness_found", outcome.witness().is_some(), "");
        run.audit(a);
    }

    run.csv("distances.csv", &distance_csv(&report.rows)?)?;
    run.json("avoidance.json", &AvoidOut { report, closed_form })
}
