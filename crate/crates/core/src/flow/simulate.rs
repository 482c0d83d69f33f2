//! IMEX time stepping: `L` implicit, `E(u)` explicit.

use serde::{Deserialize, Serialize};

use crate::audit::AuditReport;
use crate::error::{ensure, Error, Result};
use crate::linalg::SymTridiag;

use super::FlowBase;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphState {
    pub tau: f64,
    pub u: Vec<f64>,
    /// `+1` / `-1` for one-sided runs, `0` otherwise.
    pub side: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopCause {
    SpanEnd,
    /// The next state would have left the graphical regime.
    Graphicality,
    /// The next state would have exceeded the requested sup-norm limit.
    SupLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub base_digest: String,
    pub dtau: f64,
    pub scheme: String,
    pub states: Vec<GraphState>,
    pub stop: StopCause,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimOptions {
    /// Stop before `sup |u|` exceeds this value.
    pub sup_limit: Option<f64>,
}

/// The implicit matrix `W + dτ A` (with `A = -W L`) on interior nodes.
#[derive(Debug, Clone)]
pub(crate) struct Imex {
    matrix: SymTridiag,
    idx: Vec<usize>,
    dtau: f64,
}

impl Imex {
    pub(crate) fn new(base: &FlowBase, dtau: f64) -> Self {
        let a = base.op.weighted_matrix();
        let idx = base.op.grid.interior_indices();
        let matrix = SymTridiag {
            d: a.d.iter().zip(&idx).map(|(d, &i)| base.op.grid.weights[i] + dtau * d).collect(),
            e: a.e.iter().map(|e| dtau * e).collect(),
            corner: a.corner.map(|c| dtau * c),
        };
        Imex { matrix, idx, dtau }
    }

    /// Solves `(I - dτ L) u_new = u + dτ f` with homogeneous Dirichlet data.
    pub(crate) fn solve(&self, base: &FlowBase, u: &[f64], f: &[f64]) -> Result<Vec<f64>> {
        let w = &base.op.grid.weights;
        let rhs: Vec<f64> = self.idx.iter().map(|&i| w[i] * (u[i] + self.dtau * f[i])).collect();
        let x = self.matrix.solve(&rhs).map_err(|e| Error::numerical(format!("implicit solve failed: {e}")))?;
        let mut out = vec![0.0; u.len()];
        for (k, &i) in self.idx.iter().enumerate() {
            out[i] = x[k];
        }
        Ok(out)
    }

    fn step(&self, base: &FlowBase, u: &[f64]) -> Result<Vec<f64>> {
        let e = base.error_term_unchecked(u)?;
        self.solve(base, u, &e)
    }
}

fn validate_dtau(base: &FlowBase, u: &[f64], dtau: f64) -> Result<()> {
    ensure(dtau > 0.0 && dtau.is_finite(), || format!("dtau must be positive, got {dtau}"))?;
    let bound = base.stability_bound(u)?;
    ensure(dtau <= bound.dtau_max, || {
        format!("dtau = {dtau} exceeds the reported stability bound {:.3e}", bound.dtau_max)
    })
}

/// One IMEX step `(I - dτ L) u_{k+1} = u_k + dτ E(u_k)`.
pub fn step(base: &FlowBase, state: &GraphState, dtau: f64) -> Result<GraphState> {
    base.check_graphical(&state.u)?;
    validate_dtau(base, &state.u, dtau)?;
    let u = Imex::new(base, dtau).step(base, &state.u)?;
    Ok(GraphState { tau: state.tau + dtau, u, side: state.side })
}

fn sup(u: &[f64]) -> f64 {
    u.iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Integrates from `u0` at `tau_span[0]` until `tau_span[1]` or a stop
/// signal. Dirichlet nodes are held at zero.
pub fn simulate(
    base: &FlowBase,
    u0: &[f64],
    tau_span: [f64; 2],
    dtau: f64,
    side: i8,
    options: SimOptions,
) -> Result<Trajectory> {
    ensure(tau_span[1] > tau_span[0], || format!("tau span must be increasing, got {tau_span:?}"))?;
    ensure(u0.len() == base.len(), || format!("u0 has {} values, base has {} nodes", u0.len(), base.len()))?;
    let mut u: Vec<f64> = u0.to_vec();
    for (i, v) in u.iter_mut().enumerate() {
        if !base.is_interior(i) {
            *v = 0.0;
        }
    }
    base.check_graphical(&u)?;
    validate_dtau(base, &u, dtau)?;
    if let Some(lim) = options.sup_limit {
        ensure(sup(&u) <= lim, || format!("initial sup |u| = {} already exceeds the limit {lim}", sup(&u)))?;
    }
    let imex = Imex::new(base, dtau);
    let nsteps = ((tau_span[1] - tau_span[0]) / dtau - 1e-9).ceil() as usize;
    let mut states = vec![GraphState { tau: tau_span[0], u: u.clone(), side }];
    let mut stop = StopCause::SpanEnd;
    for k in 1..=nsteps {
        let next = imex.step(base, &u);
        let next = match next {
            Ok(v) => v,
            Err(Error::Validation(_)) => {
                stop = StopCause::Graphicality;
                break;
            }
            Err(e) => return Err(e),
        };
        if !(base.graph_norm(&next)? <= base.eta_graph) {
            stop = StopCause::Graphicality;
            break;
        }
        if let Some(lim) = options.sup_limit {
            if sup(&next) > lim {
                stop = StopCause::SupLimit;
                break;
            }
        }
        u = next;
        states.push(GraphState { tau: tau_span[0] + k as f64 * dtau, u: u.clone(), side });
    }
    Ok(Trajectory {
        base_digest: base.soliton.digest(),
        dtau,
        scheme: "imex-euler: backward Euler in L, forward Euler in E(u)".into(),
        states,
        stop,
    })
}

impl Trajectory {
    pub fn taus(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.tau).collect()
    }

    pub fn check_base(&self, base: &FlowBase) -> Result<()> {
        ensure(self.base_digest == base.soliton.digest(), || "trajectory was computed on a different base".into())
    }

    pub fn summary(&self, base: &FlowBase) -> Result<TrajectorySummary> {
        self.check_base(base)?;
        let mut rows = Vec::with_capacity(self.states.len());
        for s in &self.states {
            rows.push(NormRow {
                tau: s.tau,
                sup: sup(&s.u),
                weighted: base.op.grid.norm(&s.u),
                graph: base.graph_norm(&s.u)?,
            });
        }
        Ok(TrajectorySummary {
            base_digest: self.base_digest.clone(),
            dtau: self.dtau,
            scheme: self.scheme.clone(),
            steps: self.states.len() - 1,
            stop: self.stop,
            eta_graph: base.eta_graph,
            norms: rows,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormRow {
    pub tau: f64,
    pub sup: f64,
    pub weighted: f64,
    pub graph: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub base_digest: String,
    pub dtau: f64,
    pub scheme: String,
    pub steps: usize,
    pub stop: StopCause,
    pub eta_graph: f64,
    pub norms: Vec<NormRow>,
}

/// Conversion between rescaled time and unrescaled time slices
/// `M(t) = sqrt(-t) Σ_τ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeMap {
    /// `t = -e^{-τ}`: τ → -∞ is the ancient end.
    #[default]
    MinusExpMinusTau,
    /// `t = -e^{τ}`.
    MinusExpTau,
}

impl TimeMap {
    pub fn t(self, tau: f64) -> f64 {
        match self {
            TimeMap::MinusExpMinusTau => -(-tau).exp(),
            TimeMap::MinusExpTau => -tau.exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanConvexitySlice {
    pub tau: f64,
    pub t: f64,
    /// `2 t H + <x, ν>` of `M(t)` per node.
    pub values: Vec<f64>,
    /// `(2 t H + <x, ν>) / sqrt(1 + H^2)` per node.
    pub normalized: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanConvexity {
    pub slices: Vec<MeanConvexitySlice>,
    pub audit: AuditReport,
}

/// Shrinker mean convexity `2tH + <x,ν>` along a trajectory, with an audit
/// of strict positivity (after the first step) for one-sided runs.
pub fn shrinker_mean_convexity(traj: &Trajectory, base: &FlowBase, map: TimeMap) -> Result<MeanConvexity> {
    traj.check_base(base)?;
    let mut slices = Vec::with_capacity(traj.states.len());
    for st in &traj.states {
        let t = map.t(st.tau);
        let scale = (-t).sqrt();
        let speeds = base.graph_speeds(&st.u)?;
        let mut values = Vec::with_capacity(speeds.len());
        let mut normalized = Vec::with_capacity(speeds.len());
        for g in &speeds {
            let val = 2.0 * scale * (-g.mean_curvature + 0.5 * g.xdotnu);
            let hm = g.mean_curvature / scale;
            values.push(val);
            normalized.push(val / (1.0 + hm * hm).sqrt());
        }
        slices.push(MeanConvexitySlice { tau: st.tau, t, values, normalized });
    }
    let side = traj.states.first().map(|s| s.side).unwrap_or(0);
    let audit = if side == 0 || slices.len() < 2 {
        AuditReport::not_applicable("shrinker_mean_convexity", "positivity is audited only on one-sided runs")
    } else {
        let mut rep = AuditReport::new("shrinker_mean_convexity");
        let mut worst = f64::INFINITY;
        for sl in &slices[1..] {
            for (i, v) in sl.values.iter().enumerate() {
                if base.is_interior(i) {
                    worst = worst.min(side as f64 * v);
                }
            }
        }
        rep.constant("min_signed_value", worst);
        rep.check_gt("signed_value_positive_after_first_step", worst, 0.0);
        rep
    };
    Ok(MeanConvexity { slices, audit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soliton::build_sphere;

    #[test]
    fn zero_is_a_fixed_point() {
        let base = FlowBase::new(&build_sphere(2, 100).unwrap()).unwrap();
        let st = GraphState { tau: 0.0, u: vec![0.0; base.len()], side: 0 };
        let next = step(&base, &st, 0.01).unwrap();
        assert!(next.u.iter().all(|v| *v == 0.0));
        let traj = simulate(&base, &st.u, [0.0, 5.0], 0.01, 0, SimOptions::default()).unwrap();
        assert_eq!(traj.stop, StopCause::SpanEnd);
        assert!(traj.states.iter().all(|s| s.u.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn sphere_radial_oracle_short() {
        let base = FlowBase::new(&build_sphere(2, 200).unwrap()).unwrap();
        let traj = simulate(&base, &vec![0.01; base.len()], [0.0, 0.5], 1e-3, 1, SimOptions::default()).unwrap();
        let c = 2.01f64.powi(2) - 4.0;
        let last = traj.states.last().unwrap();
        let exact = (4.0 + c * last.tau.exp()).sqrt() - 2.0;
        assert!((last.u[50] - exact).abs() / exact < 1e-2);
    }

    #[test]
    fn time_maps() {
        assert_eq!(TimeMap::MinusExpMinusTau.t(0.0), -1.0);
        assert!((TimeMap::MinusExpTau.t(1.0) + 1f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn outside_sphere_mean_convexity() {
        let base = FlowBase::new(&build_sphere(2, 200).unwrap()).unwrap();
        let traj = simulate(&base, &vec![0.05; base.len()], [0.0, 0.01], 1e-3, 1, SimOptions::default()).unwrap();
        let mc = shrinker_mean_convexity(&traj, &base, TimeMap::MinusExpMinusTau).unwrap();
        let rho: f64 = 2.05;
        assert!((mc.slices[0].values[10] - (rho * rho - 4.0) / rho).abs() < 1e-9);
        assert_eq!(mc.audit.status, crate::audit::AuditStatus::Pass);
    }
}
