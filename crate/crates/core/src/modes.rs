//! Spectral mode tracks along trajectories and the audits built on them.

use serde::{Deserialize, Serialize};

use crate::audit::{AuditReport, AuditStatus};
use crate::error::{ensure, Result};
use crate::flow::{FlowBase, GraphState, StopCause, Trajectory};
use crate::parallel::{map_slice, Parallelism};
use crate::spectrum::{project, weighted_inner, Relation, Spectrum};
use crate::stats::{ls_slope, mean_std};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeTrack {
    pub mu: f64,
    pub taus: Vec<f64>,
    /// `||Π_{<μ} u||_W`
    pub below: Vec<f64>,
    /// `||Π_{=μ} u||_W`
    pub at: Vec<f64>,
    /// `||u - Π_{<=μ} u||_W`, which includes the part outside the computed modes.
    pub above: Vec<f64>,
    pub total: Vec<f64>,
    /// Running maximum of `||u||_2^{(1)}`.
    pub delta: Vec<f64>,
    /// Weighted norm of the part of `u` outside the computed modes.
    pub tail: Vec<f64>,
}

impl ModeTrack {
    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    /// Largest `|below^2 + at^2 + above^2 - total^2| / total^2`.
    pub fn parseval_defect(&self) -> f64 {
        (0..self.len())
            .filter(|&k| self.total[k] > 0.0)
            .map(|k| {
                let s = self.below[k].powi(2) + self.at[k].powi(2) + self.above[k].powi(2);
                (s - self.total[k].powi(2)).abs() / self.total[k].powi(2)
            })
            .fold(0.0, f64::max)
    }

    /// Indices with `delta <= delta0`.
    pub fn window(&self, delta0: f64) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.delta[k] <= delta0).collect()
    }
}

fn check_same_base(traj: &Trajectory, base: &FlowBase, spec: &Spectrum) -> Result<()> {
    let d = base.soliton.digest();
    ensure(traj.base_digest == d, || "trajectory was computed on a different base".into())?;
    ensure(spec.base_digest() == d, || "spectrum was computed on a different base".into())
}

/// Mode tracks of `traj` relative to the threshold `mu`.
pub fn track_modes(traj: &Trajectory, base: &FlowBase, spec: &Spectrum, mu: f64) -> Result<ModeTrack> {
    check_same_base(traj, base, spec)?;
    ensure(spec.lambdas.iter().any(|l| Relation::Gt.selects(*l, mu, spec.kappa_kernel)), || {
        format!("spectrum has no computed eigenvalue above mu = {mu}; compute more modes")
    })?;
    let grid = &spec.grid;
    let mut t = ModeTrack {
        mu,
        taus: Vec::new(),
        below: Vec::new(),
        at: Vec::new(),
        above: Vec::new(),
        total: Vec::new(),
        delta: Vec::new(),
        tail: Vec::new(),
    };
    let mut delta = 0.0f64;
    for st in &traj.states {
        let lo = project(spec, &st.u, Relation::Lt, mu)?;
        let eq = project(spec, &st.u, Relation::Eq, mu)?;
        let rest: Vec<f64> = st.u.iter().zip(lo.iter().zip(&eq)).map(|(u, (a, b))| u - a - b).collect();
        delta = delta.max(base.graph_norm(&st.u)?);
        t.taus.push(st.tau);
        t.below.push(grid.norm(&lo));
        t.at.push(grid.norm(&eq));
        t.above.push(grid.norm(&rest));
        t.total.push(grid.norm(&st.u));
        t.delta.push(delta);
        t.tail.push(spec.tail(&st.u)?);
    }
    Ok(t)
}

/// Thresholds `λ_1..λ_I` followed by `0`.
pub fn family_thresholds(spec: &Spectrum) -> Vec<f64> {
    let mut mus: Vec<f64> = spec.lambdas.iter().copied().filter(|l| *l <= -spec.kappa_kernel).collect();
    mus.push(0.0);
    mus
}

pub fn track_family(
    traj: &Trajectory,
    base: &FlowBase,
    spec: &Spectrum,
    par: Parallelism,
) -> Result<Vec<ModeTrack>> {
    map_slice(par, &family_thresholds(spec), |mu| track_modes(traj, base, spec, *mu)).into_iter().collect()
}

/// The linear evolution `Σ_j c_j e^{-λ_j τ} φ_j` sampled at `taus`.
pub fn linear_trajectory(spec: &Spectrum, coeffs: &[(usize, f64)], taus: &[f64]) -> Result<Trajectory> {
    for (j, _) in coeffs {
        ensure(*j < spec.count(), || format!("mode {j} not computed ({} modes)", spec.count()))?;
    }
    ensure(taus.windows(2).all(|w| w[1] > w[0]), || "taus must be increasing".into())?;
    let states = taus
        .iter()
        .map(|&tau| {
            let mut u = vec![0.0; spec.grid.len()];
            for &(j, c) in coeffs {
                let a = c * (-spec.lambdas[j] * tau).exp();
                u.iter_mut().zip(&spec.phis[j]).for_each(|(x, p)| *x += a * p);
            }
            GraphState { tau, u, side: 0 }
        })
        .collect();
    Ok(Trajectory {
        base_digest: spec.base_digest().to_string(),
        dtau: if taus.len() > 1 { taus[1] - taus[0] } else { 0.0 },
        scheme: "linear".into(),
        states,
        stop: StopCause::SpanEnd,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MzOptions {
    /// Audits use only times with `delta <= delta0`.
    pub delta0: f64,
    /// Ratios whose numerator is below `noise_floor * total` count as zero.
    pub noise_floor: f64,
    /// Largest acceptable fitted constant.
    pub c_max: f64,
}

impl Default for MzOptions {
    fn default() -> Self {
        MzOptions { delta0: 0.02, noise_floor: 1e-9, c_max: 1e3 }
    }
}

fn fitted_ratio(num: &[f64], den: &[f64], track: &ModeTrack, idx: &[usize], floor: f64) -> f64 {
    idx.iter()
        .map(|&k| {
            if num[k] <= floor * track.total[k] {
                0.0
            } else if den[k] * track.delta[k] > 0.0 {
                num[k] / (track.delta[k] * den[k])
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}

/// Fits `C` in `above <= C delta (below + at)` on the smallness window and
/// the constant of whichever alternative holds there:
/// `at + above <= C delta below` (below-dominant) or
/// `below + above <= C delta at` (μ-dominant).
pub fn merle_zaag_audit(track: &ModeTrack, opts: &MzOptions) -> AuditReport {
    let name = "merle_zaag";
    let idx: Vec<usize> = track.window(opts.delta0).into_iter().filter(|&k| track.total[k] > 0.0).collect();
    if idx.is_empty() {
        return AuditReport::not_applicable(name, format!("no nonzero state with delta <= {}", opts.delta0));
    }
    let mut rep = AuditReport::new(name);
    rep.constant("mu", track.mu);
    rep.constant("delta0", opts.delta0);
    rep.constant("window_start", track.taus[idx[0]]);
    rep.constant("window_end", track.taus[idx[idx.len() - 1]]);
    let low: Vec<f64> = track.below.iter().zip(&track.at).map(|(a, b)| a + b).collect();
    let c_stable = fitted_ratio(&track.above, &low, track, &idx, opts.noise_floor);
    rep.constant("c_stable", c_stable);
    rep.check_le("c_stable_bounded", c_stable, opts.c_max);

    let last = idx[idx.len() - 1];
    let mu_dominant = track.at[last] >= track.below[last];
    let c_alt = if mu_dominant {
        let num: Vec<f64> = track.below.iter().zip(&track.above).map(|(a, b)| a + b).collect();
        fitted_ratio(&num, &track.at, track, &idx, opts.noise_floor)
    } else {
        let num: Vec<f64> = track.at.iter().zip(&track.above).map(|(a, b)| a + b).collect();
        fitted_ratio(&num, &track.below, track, &idx, opts.noise_floor)
    };
    rep.note(if mu_dominant { "alternative: mu-dominant" } else { "alternative: below-dominant" });
    rep.constant("mu_dominant", if mu_dominant { 1.0 } else { 0.0 });
    rep.constant("c_alternative", c_alt);
    rep.check_le("c_alternative_bounded", c_alt, opts.c_max);
    rep
}

/// Compares the fitted constants of two audits of the same run at different
/// resolutions; passes when each drifts by less than `drift_tol`.
pub fn refinement_audit(coarse: &AuditReport, fine: &AuditReport, drift_tol: f64) -> AuditReport {
    let mut rep = AuditReport::new(format!("{}_refinement", coarse.name));
    if coarse.status == AuditStatus::NotApplicable || fine.status == AuditStatus::NotApplicable {
        return AuditReport::not_applicable(rep.name, "one of the audits is not applicable");
    }
    rep.check_flag("both_pass", coarse.passed() && fine.passed(), "");
    for key in ["c_stable", "c_alternative"] {
        let (Some(a), Some(b)) = (coarse.constants.get(key), fine.constants.get(key)) else {
            continue;
        };
        let scale = a.abs().max(b.abs());
        let drift = if scale == 0.0 { 0.0 } else { (a - b).abs() / scale };
        rep.constant(format!("{key}_coarse"), *a);
        rep.constant(format!("{key}_fine"), *b);
        rep.check_lt(format!("{key}_drift"), drift, drift_tol);
    }
    if let (Some(a), Some(b)) = (coarse.constants.get("mu_dominant"), fine.constants.get("mu_dominant")) {
        rep.check_flag("same_alternative", a == b, "");
    }
    rep
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    pub delta0: f64,
    /// Minimum number of e-foldings of `||u||_W` inside the window.
    pub min_efoldings: f64,
    /// Two thresholds whose residuals differ by less than this fraction are
    /// reported as ambiguous.
    pub ambiguity: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { delta0: 0.02, min_efoldings: 1.0, ambiguity: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominantModeFit {
    pub mu_star: Option<f64>,
    pub rate: Option<f64>,
    /// `[min, max]` of `e^{μ* τ} ||u||_W` over the e-folding nearest the soliton.
    pub alpha_bounds: Option<[f64; 2]>,
    /// Mean relative off-mode residual `||Π_{≠μ} u||_W / ||u||_W` per threshold.
    pub residuals: Vec<(f64, f64)>,
    pub ambiguous: bool,
    pub audit: AuditReport,
}

/// Indices of the e-folding of `total` closest to the soliton (smallest norms).
fn nearest_efolding(total: &[f64], idx: &[usize]) -> Vec<usize> {
    let lo = idx.iter().map(|&k| total[k]).fold(f64::INFINITY, f64::min);
    idx.iter().copied().filter(|&k| total[k] <= lo * std::f64::consts::E).collect()
}

/// Selects the threshold whose spectral band carries the trajectory and fits
/// the exponential rate of `||u||_W`.
pub fn dominant_mode_fit(family: &[ModeTrack], opts: &FitOptions) -> Result<DominantModeFit> {
    ensure(!family.is_empty(), || "empty track family".into())?;
    let first = &family[0];
    ensure(family.iter().all(|t| t.taus == first.taus), || "tracks have different time grids".into())?;
    let na = |reason: String| DominantModeFit {
        mu_star: None,
        rate: None,
        alpha_bounds: None,
        residuals: Vec::new(),
        ambiguous: false,
        audit: AuditReport::not_applicable("dominant_mode_fit", reason),
    };
    let idx: Vec<usize> = first.window(opts.delta0).into_iter().filter(|&k| first.total[k] > 0.0).collect();
    if idx.len() < 3 {
        return Ok(na(format!("fewer than 3 nonzero states with delta <= {}", opts.delta0)));
    }
    let logs: Vec<f64> = idx.iter().map(|&k| first.total[k].ln()).collect();
    let span = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - logs.iter().cloned().fold(f64::INFINITY, f64::min);
    if span < opts.min_efoldings {
        return Ok(na(format!("only {span:.3} e-foldings of ||u||_W in the window")));
    }
    let residuals: Vec<(f64, f64)> = family
        .iter()
        .map(|t| {
            let r = idx
                .iter()
                .map(|&k| (t.below[k].powi(2) + t.above[k].powi(2)).sqrt() / t.total[k])
                .sum::<f64>()
                / idx.len() as f64;
            (t.mu, r)
        })
        .collect();
    let mut order: Vec<usize> = (0..residuals.len()).collect();
    order.sort_by(|&a, &b| residuals[a].1.total_cmp(&residuals[b].1));
    let best = order[0];
    let ambiguous = order.len() > 1 && {
        let (r1, r2) = (residuals[best].1, residuals[order[1]].1);
        r2 - r1 <= opts.ambiguity * r2
    };
    let mu_star = residuals[best].0;
    let taus: Vec<f64> = idx.iter().map(|&k| first.taus[k]).collect();
    let rate = ls_slope(&taus, &logs);
    let near = nearest_efolding(&first.total, &idx);
    let scaled: Vec<f64> = near.iter().map(|&k| (mu_star * first.taus[k]).exp() * first.total[k]).collect();
    let alpha = [
        scaled.iter().cloned().fold(f64::INFINITY, f64::min),
        scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    ];

    let mut audit = AuditReport::new("dominant_mode_fit");
    audit.constant("mu_star", mu_star);
    audit.constant("rate", rate);
    audit.constant("efoldings", span);
    audit.constant("alpha_min", alpha[0]);
    audit.constant("alpha_max", alpha[1]);
    audit.check_flag("unambiguous", !ambiguous, format!("residuals {residuals:?}"));
    let rel = if mu_star == 0.0 { rate.abs() } else { (rate + mu_star).abs() / mu_star.abs() };
    audit.check_le("rate_matches_mu_star", rel, 0.05);
    Ok(DominantModeFit { mu_star: Some(mu_star), rate: Some(rate), alpha_bounds: Some(alpha), residuals, ambiguous, audit })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayOptions {
    pub delta0: f64,
    /// `|α_1|` must exceed this many sample standard deviations.
    pub separation: f64,
    /// Largest acceptable negative log-log slope of the scaled remainder
    /// against `||u||_W`.
    pub trend_tol: f64,
    pub noise_floor: f64,
}

impl Default for DecayOptions {
    fn default() -> Self {
        DecayOptions { delta0: 0.02, separation: 10.0, trend_tol: 0.25, noise_floor: 1e-9 }
    }
}

/// Audits the first-mode law `u ~ α_1 e^{-λ_1 τ} φ_1` of a one-sided run and
/// estimates `α_1`.
pub fn one_sided_decay_audit(
    traj: &Trajectory,
    base: &FlowBase,
    spec: &Spectrum,
    opts: &DecayOptions,
) -> Result<AuditReport> {
    check_same_base(traj, base, spec)?;
    let name = "one_sided_decay";
    let side = traj.states.first().map(|s| s.side).unwrap_or(0);
    let signed_ok = |s: f64| {
        traj.states.iter().all(|st| {
            st.u.iter().enumerate().all(|(i, v)| !base.is_interior(i) || s * v > 0.0)
        })
    };
    let s = if side != 0 {
        side as f64
    } else if signed_ok(1.0) {
        1.0
    } else {
        -1.0
    };
    if !signed_ok(s) {
        let mut r = AuditReport::not_applicable(name, "precondition failed: u is not one-sided");
        r.check_flag("one_sided", false, "u changes sign or vanishes at an interior node");
        r.status = AuditStatus::NotApplicable;
        return Ok(r);
    }
    let lam1 = spec.lambdas[0];
    let phi1 = &spec.phis[0];
    let track = track_modes(traj, base, spec, lam1)?;
    let idx: Vec<usize> = track.window(opts.delta0).into_iter().filter(|&k| track.total[k] > 0.0).collect();
    if idx.len() < 3 {
        return Ok(AuditReport::not_applicable(name, format!("fewer than 3 states with delta <= {}", opts.delta0)));
    }
    let near = nearest_efolding(&track.total, &idx);
    let samples: Vec<f64> = near
        .iter()
        .map(|&k| Ok((lam1 * track.taus[k]).exp() * weighted_inner(&traj.states[k].u, phi1, &spec.grid)?))
        .collect::<Result<_>>()?;
    let (alpha, sd) = mean_std(&samples);
    let mut rep = AuditReport::new(name);
    rep.constant("lambda1", lam1);
    rep.constant("alpha1", alpha);
    rep.constant("alpha1_std", sd);
    rep.constant("side", s);
    rep.constant("window_start", track.taus[near[0]]);
    rep.constant("window_end", track.taus[near[near.len() - 1]]);
    rep.check_flag("alpha1_has_side_sign", alpha * s > 0.0, format!("alpha1 = {alpha:.6e}"));
    rep.check_gt("alpha1_separated_from_noise", alpha.abs(), opts.separation * sd);

    // e^{2λ_1 τ} ||Π_{≠λ_1} u||_W must not blow up as ||u||_W -> 0
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &k in &idx {
        let rem = (track.below[k].powi(2) + track.above[k].powi(2)).sqrt();
        if rem > opts.noise_floor * track.total[k] {
            xs.push(track.total[k].ln());
            ys.push(2.0 * lam1 * track.taus[k] + rem.ln());
        }
    }
    if xs.len() >= 3 {
        let slope = ls_slope(&xs, &ys);
        rep.constant("remainder_loglog_slope", slope);
        rep.check_ge("remainder_bounded", slope, -opts.trend_tol);
    } else {
        rep.note("remainder below the noise floor throughout the window");
        rep.constant("remainder_loglog_slope", 0.0);
    }
    Ok(rep)
}

/// `||Π_{=λ_1} u||_W / ||u||_W` per state.
pub fn first_mode_share(track: &ModeTrack) -> Vec<f64> {
    (0..track.len()).map(|k| if track.total[k] > 0.0 { track.at[k] / track.total[k] } else { 0.0 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{simulate, SimOptions};
    use crate::soliton::build_sphere;
    use crate::spectrum::eigensolve;

    fn sphere(m: usize) -> (FlowBase, Spectrum) {
        let s = build_sphere(2, m).unwrap();
        (FlowBase::new(&s).unwrap(), eigensolve(&s, 6).unwrap())
    }

    #[test]
    fn zero_trajectory() {
        let (base, spec) = sphere(100);
        let traj = simulate(&base, &vec![0.0; 100], [0.0, 0.1], 0.01, 0, SimOptions::default()).unwrap();
        let t = track_modes(&traj, &base, &spec, -1.0).unwrap();
        assert!(t.total.iter().chain(&t.below).chain(&t.at).chain(&t.above).chain(&t.delta).all(|v| *v == 0.0));
        let fam = track_family(&traj, &base, &spec, Parallelism::Sequential).unwrap();
        let fit = dominant_mode_fit(&fam, &FitOptions::default()).unwrap();
        assert_eq!(fit.audit.status, AuditStatus::NotApplicable);
        assert_eq!(merle_zaag_audit(&t, &MzOptions::default()).status, AuditStatus::NotApplicable);
    }

    #[test]
    fn single_mode_synthetic() {
        let (base, spec) = sphere(200);
        let taus: Vec<f64> = (0..20).map(|k| -2.0 + 0.1 * k as f64).collect();
        let traj = linear_trajectory(&spec, &[(1, 0.003)], &taus).unwrap();
        let t = track_modes(&traj, &base, &spec, spec.lambdas[1]).unwrap();
        for k in 0..t.len() {
            let exact = 0.003 * (-spec.lambdas[1] * taus[k]).exp();
            assert!((t.at[k] - exact).abs() < 1e-12 * exact.max(1.0));
            assert!(t.below[k] < 1e-12 && t.above[k] < 1e-9 * exact);
        }
        assert!(t.parseval_defect() < 1e-10);
    }

    #[test]
    fn above_only_content_fails_the_audit() {
        let (base, spec) = sphere(200);
        let taus: Vec<f64> = (0..20).map(|k| 0.1 * k as f64).collect();
        let traj = linear_trajectory(&spec, &[(3, 1e-3)], &taus).unwrap();
        let t = track_modes(&traj, &base, &spec, spec.lambdas[0]).unwrap();
        let rep = merle_zaag_audit(&t, &MzOptions::default());
        assert!(rep.failed(), "{rep:?}");
    }

    #[test]
    fn delta_is_running_max() {
        let (base, spec) = sphere(200);
        let taus: Vec<f64> = (0..30).map(|k| 0.2 * k as f64).collect();
        // λ_4 > 0, so this mode decays
        let traj = linear_trajectory(&spec, &[(4, 1e-3)], &taus).unwrap();
        let t = track_modes(&traj, &base, &spec, -1.0).unwrap();
        assert!(t.delta.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(t.delta[29], t.delta[0]);
    }

    #[test]
    fn radial_run_alpha_and_rate() {
        let (base, spec) = sphere(200);
        let eps = 0.01;
        let traj = simulate(&base, &vec![eps; 200], [0.0, 4.0], 1e-3, 1, SimOptions { sup_limit: Some(0.1) }).unwrap();
        let fam = track_family(&traj, &base, &spec, Parallelism::Sequential).unwrap();
        let fit = dominant_mode_fit(&fam, &FitOptions::default()).unwrap();
        assert_eq!(fit.mu_star, Some(spec.lambdas[0]));
        assert!((fit.rate.unwrap() - 1.0).abs() < 0.02, "{fit:?}");
        let rep = one_sided_decay_audit(&traj, &base, &spec, &DecayOptions::default()).unwrap();
        assert!(rep.passed(), "{rep:?}");
        // ρ - 2 ≈ C e^τ / 4 and φ_1 = F^{-1/2}
        let c = (2.0 + eps).powi(2) - 4.0;
        let expected = c / 4.0 * (4.0 / std::f64::consts::E).sqrt();
        assert!((rep.constants["alpha1"] / expected - 1.0).abs() < 0.03);
    }

    #[test]
    fn sign_change_is_a_precondition_failure() {
        let (base, spec) = sphere(200);
        let u: Vec<f64> = spec.phis[1].iter().map(|p| 1e-3 * p).collect();
        let traj = simulate(&base, &u, [0.0, 0.05], 1e-2, 0, SimOptions::default()).unwrap();
        let rep = one_sided_decay_audit(&traj, &base, &spec, &DecayOptions::default()).unwrap();
        assert_eq!(rep.status, AuditStatus::NotApplicable);
    }
}
