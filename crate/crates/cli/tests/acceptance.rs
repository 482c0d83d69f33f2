//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::f64::consts::{E, PI};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use shrinkerlab::ancient::{build_ancient, forward_consistency, AncientConfig, AncientSeed};
use shrinkerlab::avoidance::{
    avoidance_audit, frankel_probe, k_operator_check, radial_distance, AvoidanceOptions, AvoidanceWindow,
    ConformalField,
};
use shrinkerlab::density::{density_ratio, entropy, f_area, huisken_table, EntropySearch, SpacetimePoint, SurfaceFlow};
use shrinkerlab::flow::{simulate, FlowBase, SimOptions, Trajectory};
use shrinkerlab::modes::{
    dominant_mode_fit, merle_zaag_audit, one_sided_decay_audit, refinement_audit, track_family, DecayOptions,
    FitOptions, MzOptions,
};
use shrinkerlab::parallel::Parallelism;
use shrinkerlab::soliton::{
    build_cylinder, build_sphere, conical_end, find_torus, SolitonKind, SolitonMode, SymmetricSoliton, TorusConfig,
};
use shrinkerlab::spectrum::{eigensolve, structural_residuals, Spectrum};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(t0: Instant, limit: Duration) -> Result<Duration, String> {
    let el = t0.elapsed();
    ensure(el < limit, || format!("took {el:?}, limit {limit:?}"))?;
    Ok(el)
}

fn torus(m: usize) -> SymmetricSoliton {
    find_torus(2, [3.2, 3.4], 1e-3, &TorusConfig { m, ..Default::default() }).expect("torus")
}

fn refined(coarse: &SymmetricSoliton, fine: &SymmetricSoliton, count: usize) -> Spectrum {
    let f = eigensolve(fine, count).expect("eigensolve");
    eigensolve(coarse, count).expect("eigensolve").with_refinement(&f).expect("refine")
}

/// Axially symmetric spherical harmonics on the sphere of radius 2:
/// `-L Y_l = (l (l + 1) / 4 - 1) Y_l`.
fn sphere_oracle(k: usize) -> Vec<f64> {
    (0..k).map(|l| (l * (l + 1)) as f64 / 4.0 - 1.0).collect()
}

/// Hermite polynomials along the cylinder axis: `-L H_k = (k / 2 - 1) H_k`.
fn cylinder_oracle(k: usize) -> Vec<f64> {
    (0..k).map(|j| j as f64 / 2.0 - 1.0).collect()
}

fn max_dev(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn c1_model_residuals() -> Outcome {
    let t0 = Instant::now();
    let rs = build_sphere(2, 1000).map_err(|e| e.to_string())?.residual_sup(SolitonMode::Shrinker);
    let rc = build_cylinder(2, 8.0, 400).map_err(|e| e.to_string())?.residual_sup(SolitonMode::Shrinker);
    let (a, b) = (torus(800).residual_sup(SolitonMode::Shrinker), torus(1600).residual_sup(SolitonMode::Shrinker));
    let el = within_time(t0, Duration::from_secs(1))?;
    ensure(rs < 1e-8, || format!("sphere residual {rs:e}"))?;
    ensure(rc < 1e-10, || format!("cylinder residual {rc:e}"))?;
    let order = (a / b).log2();
    ensure((order - 2.0).abs() < 0.2, || format!("torus residual order {order}"))?;
    Ok(format!("sphere {rs:.1e}, cylinder {rc:.1e}, torus order {order:.3}, {el:.0?}"))
}

fn c2_closed_form_spectra() -> Outcome {
    let t0 = Instant::now();
    let sp = refined(&build_sphere(2, 800).unwrap(), &build_sphere(2, 1600).unwrap(), 4);
    let ds = max_dev(&sp.lambdas, &sphere_oracle(4));
    ensure(ds < 1e-3, || format!("sphere {:?}", sp.lambdas))?;
    let c8 = refined(&build_cylinder(2, 8.0, 800).unwrap(), &build_cylinder(2, 8.0, 1600).unwrap(), 4);
    let dc = max_dev(&c8.lambdas, &cylinder_oracle(4));
    ensure(dc < 1e-2, || format!("cylinder {:?}", c8.lambdas))?;
    let c10 = refined(&build_cylinder(2, 10.0, 1000).unwrap(), &build_cylinder(2, 10.0, 2000).unwrap(), 4);
    let shift = max_dev(&c8.lambdas, &c10.lambdas);
    ensure(shift < 1e-3, || format!("x_max shift {shift:e}"))?;
    let el = within_time(t0, Duration::from_secs(10))?;
    Ok(format!("sphere dev {ds:.1e}, cylinder dev {dc:.1e}, x_max 8 to 10 shift {shift:.1e}, {el:.0?}"))
}

fn c3_structural_eigenfunctions() -> Outcome {
    let mut worst = 0.0f64;
    for s in [&build_sphere(2, 800).unwrap(), &build_cylinder(2, 8.0, 800).unwrap(), &torus(1600)] {
        let r = structural_residuals(s).map_err(|e| e.to_string())?;
        ensure(r.mean_curvature <= 1e-3 && r.axial_translation <= 1e-3, || format!("{:?}: {r:?}", s.kind))?;
        worst = worst.max(r.mean_curvature).max(r.axial_translation);
    }
    Ok(format!("largest relative residual {worst:.1e}"))
}

fn c4_instability_sign() -> Outcome {
    let coarse = refined(&torus(800), &torus(1600), 2).lambdas[0];
    let fine = refined(&torus(1600), &torus(3200), 2).lambdas[0];
    ensure(coarse < -1.0 && fine < -1.0, || format!("torus lambda1 {coarse} / {fine}"))?;
    ensure((coarse - fine).abs() < 1e-3, || format!("torus lambda1 moves {coarse} -> {fine}"))?;
    let s = eigensolve(&build_sphere(2, 800).unwrap(), 1).unwrap().lambdas[0];
    let c = eigensolve(&build_cylinder(2, 8.0, 800).unwrap(), 1).unwrap().lambdas[0];
    ensure((s + 1.0).abs() < 1e-3, || format!("sphere lambda1 {s}"))?;
    ensure((c + 1.0).abs() < 1e-2, || format!("cylinder lambda1 {c}"))?;
    Ok(format!("torus lambda1 {fine:.5} (margin {:.4}), sphere {s:.6}, cylinder {c:.6}", fine + 1.0))
}

fn c5_entropy() -> Outcome {
    let t0 = Instant::now();
    let sphere = build_sphere(2, 1000).unwrap();
    let cyl = build_cylinder(2, 8.0, 1000).unwrap();
    let fs = f_area(&sphere);
    ensure((fs - 4.0 / E).abs() < 1e-6, || format!("F(sphere) = {fs}"))?;
    let search = EntropySearch::default();
    let es = entropy(&sphere, &search).map_err(|e| e.to_string())?;
    let ec = entropy(&cyl, &search).map_err(|e| e.to_string())?;
    let lc = (2.0 * PI / E).sqrt();
    ensure((ec.value - lc).abs() < 1e-3, || format!("entropy(cylinder) = {}", ec.value))?;
    for (name, r) in [("sphere", &es), ("cylinder", &ec)] {
        ensure(r.x0.abs() <= r.grid_cell[0] && (r.t0 - 1.0).abs() <= r.grid_cell[1], || {
            format!("{name} argmax ({}, {}) outside cell {:?}", r.x0, r.t0, r.grid_cell)
        })?;
    }
    let el = within_time(t0, Duration::from_secs(30))?;
    Ok(format!("F(sphere) = {fs:.9}, entropy(cylinder) = {:.7}, {el:.0?}", ec.value))
}

fn c6_gaussian_density() -> Outcome {
    let s = build_sphere(2, 1000).unwrap();
    let rs: Vec<f64> = (0..10).map(|k| 0.1 + 0.1 * k as f64).collect();
    let mut times: Vec<f64> = rs.iter().map(|r| -r * r).collect();
    times.reverse();
    let flow = SurfaceFlow::self_similar(&s, &times).unwrap();
    let o = SpacetimePoint::ORIGIN;
    let th: Vec<f64> = rs.iter().map(|&r| density_ratio(&flow, &o, r).unwrap()).collect();
    let spread = th.iter().cloned().fold(f64::MIN, f64::max) - th.iter().cloned().fold(f64::MAX, f64::min);
    let off = th.iter().map(|t| (t - 4.0 / E).abs()).fold(0.0, f64::max);
    let sup = huisken_table(&flow, &o).iter().map(|r| r.integrand_sup).fold(0.0, f64::max);
    ensure(spread < 1e-4 && off < 1e-4, || format!("theta {th:?}"))?;
    ensure(sup < 1e-6, || format!("dissipation integrand sup {sup:e}"))?;
    Ok(format!("theta spread {spread:.1e}, |theta - 4/e| {off:.1e}, integrand sup {sup:.1e}"))
}

fn radial_run(m: usize, dtau: f64, side: i8) -> (FlowBase, Trajectory) {
    let s = build_sphere(2, m).unwrap();
    let base = FlowBase::new(&s).unwrap();
    let u0 = vec![0.01 * side as f64; base.len()];
    let traj = simulate(&base, &u0, [0.0, 10.0], dtau, side, SimOptions { sup_limit: Some(0.1) }).unwrap();
    (base, traj)
}

fn c7_radial_oracle() -> Outcome {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for side in [1i8, -1] {
        let (base, traj) = radial_run(400, 1e-3, side);
        let c = (2.0 + 0.01 * side as f64).powi(2) - 4.0;
        for st in &traj.states {
            let exact = (4.0 + c * st.tau.exp()).sqrt() - 2.0;
            for (i, v) in st.u.iter().enumerate() {
                if base.is_interior(i) {
                    worst = worst.max((v / exact - 1.0).abs());
                }
            }
        }
    }
    ensure(worst <= 1e-2, || format!("relative error {worst:e}"))?;
    let el = within_time(t0, Duration::from_secs(10))?;
    Ok(format!("max relative error {worst:.1e} on both sides, {el:.0?}"))
}

fn c8_mode_dynamics() -> Outcome {
    let run = |m: usize, dtau: f64| {
        let (base, traj) = radial_run(m, dtau, 1);
        let spec = eigensolve(&base.soliton, 8).unwrap();
        let fam = track_family(&traj, &base, &spec, Parallelism::default()).unwrap();
        (base, traj, spec, fam)
    };
    let (base, traj, spec, fam) = run(400, 1e-3);
    let fit = dominant_mode_fit(&fam, &FitOptions::default()).map_err(|e| e.to_string())?;
    let mu = fit.mu_star.ok_or("no dominant mode")?;
    ensure((mu + 1.0).abs() < 1e-3, || format!("mu* = {mu}"))?;
    let rate = fit.rate.unwrap();
    ensure((rate - 1.0).abs() <= 0.05, || format!("rate {rate}"))?;
    let decay = one_sided_decay_audit(&traj, &base, &spec, &DecayOptions::default()).map_err(|e| e.to_string())?;
    ensure(decay.passed(), || format!("{decay:?}"))?;
    // u ≈ (C / 4) e^τ and φ_1 = (4 / e)^{-1/2}
    let expected = ((2.01f64).powi(2) - 4.0) / 4.0 * (4.0 / E).sqrt();
    let a1 = decay.constants["alpha1"];
    ensure((a1 / expected - 1.0).abs() <= 0.03, || format!("alpha1 {a1} vs {expected}"))?;
    let k = fam.iter().position(|t| t.mu == mu).unwrap();
    let coarse = merle_zaag_audit(&fam[k], &MzOptions::default());
    let (_, _, _, fam2) = run(800, 5e-4);
    let fine = merle_zaag_audit(&fam2[k], &MzOptions::default());
    let drift = refinement_audit(&coarse, &fine, 0.25);
    ensure(drift.passed(), || format!("{drift:?}"))?;
    Ok(format!("mu* = {mu:.6}, rate {rate:.4}, alpha1 {a1:.5e} (C-implied {expected:.5e})"))
}

fn c9_quadratic_error() -> Outcome {
    let mut lines = Vec::new();
    for s in [build_sphere(2, 400).unwrap(), build_cylinder(2, 8.0, 400).unwrap(), torus(1600)] {
        let base = FlowBase::new(&s).unwrap();
        let u: Vec<f64> = s
            .points
            .iter()
            .map(|p| match s.kind {
                SolitonKind::Cylinder => (-p.x * p.x / 8.0).exp(),
                SolitonKind::Torus => 0.25 * (1.0 + 0.15 * p.x),
                _ => 1.0 + 0.15 * p.x,
            })
            .collect();
        let r: Vec<f64> = [1e-1, 1e-2, 1e-3]
            .iter()
            .map(|&sc| {
                let us: Vec<f64> = u.iter().map(|v| v * sc).collect();
                base.weighted_norm(&base.error_term(&us).unwrap(), 0, -1.0).unwrap() / (sc * sc)
            })
            .collect();
        let hi = r.iter().cloned().fold(f64::MIN, f64::max);
        let lo = r.iter().cloned().fold(f64::MAX, f64::min);
        let spread = (hi - lo) / hi;
        ensure(spread < 0.1, || format!("{:?}: {r:?}", s.kind))?;
        lines.push(format!("{:?} {:.1}%", s.kind, 100.0 * spread));
    }
    Ok(format!("ratio spread {}", lines.join(", ")))
}

fn c10_contraction() -> Outcome {
    let t0 = Instant::now();
    let s = build_sphere(2, 200).unwrap();
    let base = FlowBase::new(&s).unwrap();
    let spec = eigensolve(&s, 8).unwrap();
    let mut mus = Vec::new();
    let mut fwd_rel = 0.0;
    for a in [1e-3, 5e-4, 2.5e-4] {
        let seed = AncientSeed::new(&[a, 0.0], &base, &spec, AncientConfig::default()).map_err(|e| e.to_string())?;
        let sol = build_ancient(&seed, &base, &spec).map_err(|e| e.to_string())?;
        let r = &sol.report;
        ensure(r.iterations <= 6, || format!("|a| = {a}: {} iterations", r.iterations))?;
        ensure(r.ratios.iter().skip(1).all(|q| *q <= 0.5), || format!("|a| = {a}: ratios {:?}", r.ratios))?;
        mus.push(r.mu_fit);
        if a == 1e-3 {
            let fwd = forward_consistency(&sol, &base, seed.delta0, 4).map_err(|e| e.to_string())?;
            ensure(fwd.passed(), || format!("{fwd:?}"))?;
            fwd_rel = fwd.constants["star_difference"] / fwd.constants["star_fixed_point"];
            ensure(fwd_rel <= 0.05, || format!("forward mismatch {fwd_rel}"))?;
        }
    }
    let drift = mus.windows(2).map(|w| (w[1] / w[0] - 1.0).abs()).fold(0.0, f64::max);
    ensure(drift < 0.25, || format!("mu {mus:?}"))?;
    let el = within_time(t0, Duration::from_secs(60))?;
    Ok(format!("mu {:.4} drift {:.1}%, forward mismatch {:.1e}, {el:.0?}", mus[0], 100.0 * drift, fwd_rel))
}

fn c11_conical_decay() -> Outcome {
    let a = conical_end(2, 1.0, 5.0, 50.0, 1e-3).map_err(|e| e.to_string())?.report;
    let b = conical_end(2, 1.0, 5.0, 50.0, 5e-4).map_err(|e| e.to_string())?.report;
    for r in [&a, &b] {
        ensure((r.slope_w + 1.0).abs() < 0.1 && (r.slope_dw + 2.0).abs() < 0.15, || format!("{r:?}"))?;
    }
    // halving ds must not loosen the fit; it is converged in ds already
    let looser = (b.slope_w + 1.0).abs() - (a.slope_w + 1.0).abs();
    let looser_d = (b.slope_dw + 2.0).abs() - (a.slope_dw + 2.0).abs();
    ensure(looser <= 1e-6 && looser_d <= 1e-6, || format!("{a:?} {b:?}"))?;
    Ok(format!(
        "slopes {:.5} / {:.5}, change under ds halving {:.1e} / {:.1e}",
        b.slope_w,
        b.slope_dw,
        (b.slope_w - a.slope_w).abs(),
        (b.slope_dw - a.slope_dw).abs()
    ))
}

fn c12_avoidance() -> Outcome {
    let field = ConformalField::new(2, 5.0, 0.0, 0.0, 0.0).unwrap();
    let d = radial_distance(&field, 0.0, 1.0, 2.0);
    let exact = 0.1 * ((7.0f64 / 3.0).ln() - 1.5f64.ln());
    ensure((d - exact).abs() < 1e-6, || format!("d = {d}, closed form {exact}"))?;

    let ts: Vec<f64> = (0..=4).map(|k| 0.05 * k as f64).collect();
    let a = SurfaceFlow::round_spheres(2, 1.0, &ts, 200).unwrap();
    let b = SurfaceFlow::round_spheres(2, 4.0, &ts, 200).unwrap();
    let w = AvoidanceWindow { a: 0.0, b: 0.2, radius: 5.0, gamma: 1.0, x0: 0.0 };
    let rep = avoidance_audit(&a, &b, &w, &AvoidanceOptions::default()).map_err(|e| e.to_string())?;
    ensure(rep.audit.passed(), || format!("{:?}", rep.audit))?;
    let mono = rep.rows.windows(2).all(|p| p[1].d >= p[0].d - 1e-6);
    ensure(mono, || format!("{:?}", rep.rows))?;

    let strict = k_operator_check(&ConformalField::new(2, 5.0, 1.0, 0.0, 0.0).unwrap(), 15).map_err(|e| e.to_string())?;
    ensure(strict.passed(), || format!("alpha = 1: {strict:?}"))?;
    let weak = k_operator_check(&field, 15).map_err(|e| e.to_string())?;
    ensure(weak.failed() && weak.failures() == ["strict_inequality"], || format!("alpha = 0: {weak:?}"))?;
    Ok(format!("d = {d:.12} (closed form {exact:.12}), d_t {:.6} -> {:.6}, alpha = 0 flagged", rep.rows[0].d, rep.rows[4].d))
}

fn c13_frankel() -> Outcome {
    let sphere = build_sphere(2, 400).unwrap();
    let cyl = build_cylinder(2, 8.0, 400).unwrap();
    let w = frankel_probe(&sphere, &cyl).witness().ok_or("no sphere-cylinder witness")?;
    let h = [&sphere, &cyl].iter().map(|s| s.spacing_range().1).fold(0.0, f64::max);
    let r2 = 2f64.sqrt();
    ensure((w.x.abs() - r2).abs() <= h && (w.r - r2).abs() <= h, || format!("{w:?}, grid {h}"))?;
    let wt = frankel_probe(&sphere, &torus(1600)).witness().ok_or("no sphere-torus witness")?;
    Ok(format!("sphere-cylinder at ({:.5}, {:.5}), sphere-torus at ({:.4}, {:.4})", w.x, w.r, wt.x, wt.r))
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_shrinkerlab")
}

fn cli_run(config: &Path, out: &Path) -> Result<(), String> {
    let st = Command::new(bin())
        .arg("--config")
        .arg(config)
        .arg("--output-dir")
        .arg(out)
        .env_remove("SHRINKERLAB_OUTPUT")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(st.status.code() == Some(0), || {
        format!("{} exited {:?}: {}", config.display(), st.status.code(), String::from_utf8_lossy(&st.stderr))
    })
}

fn json_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

fn c14_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let configs = [
        r#"{"command": "soliton", "params": {"base": "torus", "m": 800}, "seed": 3}"#,
        r#"{"command": "spectrum", "params": {"base": "sphere", "m": 800}, "seed": 3}"#,
        r#"{"command": "flow", "params": {"u0": "const:0.01", "span": 1.0}, "seed": 3}"#,
        r#"{"command": "modes", "params": {"refine": false}, "seed": 3}"#,
        r#"{"command": "ancient", "params": {}, "seed": 3}"#,
        r#"{"command": "density", "params": {"base": "cylinder"}, "seed": 3}"#,
        r#"{"command": "avoid", "params": {}, "seed": 3}"#,
    ];
    let mut files = 0;
    for (i, text) in configs.iter().enumerate() {
        let cfg = tmp.path().join(format!("c{i}.json"));
        std::fs::write(&cfg, text).map_err(|e| e.to_string())?;
        let (a, b) = (tmp.path().join(format!("a{i}")), tmp.path().join(format!("b{i}")));
        cli_run(&cfg, &a)?;
        cli_run(&cfg, &b)?;
        let (ja, jb) = (json_files(&a), json_files(&b));
        ensure(ja.len() >= 3, || format!("{text}: only {} JSON files", ja.len()))?;
        for ((na, xa), (nb, xb)) in ja.iter().zip(&jb) {
            ensure(na == nb && xa == xb, || format!("{text}: {na} differs between runs"))?;
        }
        files += ja.len();
    }
    Ok(format!("{} commands, {files} JSON files byte-identical", configs.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 14] = [
        ("model shrinker residuals", c1_model_residuals),
        ("closed-form spectra", c2_closed_form_spectra),
        ("structural eigenfunctions", c3_structural_eigenfunctions),
        ("instability sign", c4_instability_sign),
        ("F-area and entropy", c5_entropy),
        ("Gaussian density", c6_gaussian_density),
        ("radial oracle", c7_radial_oracle),
        ("mode dynamics", c8_mode_dynamics),
        ("quadratic error term", c9_quadratic_error),
        ("ancient contraction", c10_contraction),
        ("conical decay", c11_conical_decay),
        ("avoidance", c12_avoidance),
        ("Frankel probe", c13_frankel),
        ("determinism", c14_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let r = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match r {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
