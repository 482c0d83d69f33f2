use shrinkerlab::flow::{simulate, step, FlowBase, GraphState, SimOptions, StopCause};
use shrinkerlab::modes::{first_mode_share, track_family, track_modes};
use shrinkerlab::parallel::Parallelism;
use shrinkerlab::soliton::build_sphere;
use shrinkerlab::spectrum::{eigensolve, Spectrum};

fn sphere(m: usize) -> (FlowBase, Spectrum) {
    let s = build_sphere(2, m).unwrap();
    (FlowBase::new(&s).unwrap(), eigensolve(&s, 8).unwrap())
}

fn tilted(base: &FlowBase, amp: f64) -> Vec<f64> {
    base.soliton.points.iter().map(|p| amp * (1.0 + 0.25 * p.x)).collect()
}

#[test]
fn flow_is_autonomous_in_tau() {
    let (base, _) = sphere(200);
    let u0 = tilted(&base, 0.01);
    let a = simulate(&base, &u0, [0.0, 0.5], 1e-3, 1, SimOptions::default()).unwrap();
    let b = simulate(&base, &u0, [3.0, 3.5], 1e-3, 1, SimOptions::default()).unwrap();
    assert_eq!(a.states.len(), b.states.len());
    for (x, y) in a.states.iter().zip(&b.states) {
        assert!((x.tau + 3.0 - y.tau).abs() < 1e-9);
        assert!(x.u.iter().zip(&y.u).all(|(p, q)| (p - q).abs() <= 1e-15 * p.abs().max(1e-3)));
    }
}

#[test]
fn radial_run_matches_ode() {
    let (base, _) = sphere(400);
    let u0 = vec![0.01; base.len()];
    let opts = SimOptions { sup_limit: Some(0.1) };
    for side in [1i8, -1] {
        let u0: Vec<f64> = u0.iter().map(|v| side as f64 * v).collect();
        let traj = simulate(&base, &u0, [0.0, 10.0], 1e-3, side, opts).unwrap();
        assert_eq!(traj.stop, StopCause::SupLimit);
        let rho0 = 2.0 + side as f64 * 0.01;
        let c = rho0 * rho0 - 4.0;
        for st in &traj.states {
            let exact = (4.0 + c * st.tau.exp()).sqrt() - 2.0;
            let got = st.u[base.len() / 2];
            assert!((got / exact - 1.0).abs() < 1e-2, "side {side} tau {} {got} {exact}", st.tau);
        }
    }
}

#[test]
fn mode_tracks_satisfy_parseval() {
    let (base, spec) = sphere(200);
    let traj = simulate(&base, &tilted(&base, 0.01), [0.0, 1.0], 1e-3, 1, SimOptions::default()).unwrap();
    for track in track_family(&traj, &base, &spec, Parallelism::Sequential).unwrap() {
        assert!(track.parseval_defect() < 1e-10, "mu = {} defect {}", track.mu, track.parseval_defect());
    }
}

#[test]
fn first_mode_share_grows_monotonically() {
    let (base, spec) = sphere(200);
    let traj = simulate(&base, &tilted(&base, 0.005), [0.0, 10.0], 1e-3, 1, SimOptions { sup_limit: Some(0.1) }).unwrap();
    let track = track_modes(&traj, &base, &spec, spec.lambdas[0]).unwrap();
    let share = first_mode_share(&track);
    let worst_drop = share.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
    assert!(worst_drop <= 1e-3, "{worst_drop}");
    assert!(share[0] < 0.999 && *share.last().unwrap() > share[0], "{} {}", share[0], share.last().unwrap());
}

#[test]
fn parallel_and_sequential_tracks_agree_bitwise() {
    let (base, spec) = sphere(200);
    let traj = simulate(&base, &tilted(&base, 0.01), [0.0, 0.3], 1e-3, 1, SimOptions::default()).unwrap();
    let a = track_family(&traj, &base, &spec, Parallelism::Sequential).unwrap();
    let b = track_family(&traj, &base, &spec, Parallelism::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn step_is_consistent_with_the_equation() {
    let (base, _) = sphere(200);
    let u = tilted(&base, 0.02);
    let lu = base.op.apply(&u).unwrap();
    let e = base.error_term(&u).unwrap();
    let rhs: Vec<f64> = lu.iter().zip(&e).map(|(a, b)| a + b).collect();
    let state = GraphState { tau: 0.0, u: u.clone(), side: 1 };
    let defect = |dt: f64| {
        let next = step(&base, &state, dt).unwrap();
        let r: Vec<f64> = next.u.iter().zip(&u).zip(&rhs).map(|((a, b), f)| (a - b) / dt - f).collect();
        base.op.grid.norm(&r)
    };
    let (d1, d2) = (defect(1e-3), defect(5e-4));
    assert!(d2 < d1 && (d1 / d2 - 2.0).abs() < 0.2, "{d1} {d2}");
}

#[test]
fn first_eigenfunction_data_stays_one_sided() {
    let (base, spec) = sphere(200);
    let phi = &spec.phis[0];
    let s = phi[0].signum() * 0.01 / phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for side in [1i8, -1] {
        let u0: Vec<f64> = phi.iter().map(|v| side as f64 * s * v).collect();
        let traj = simulate(&base, &u0, [0.0, 5.0], 1e-3, side, SimOptions { sup_limit: Some(0.1) }).unwrap();
        assert!(traj.states.iter().all(|st| st.u.iter().all(|v| side as f64 * v > 0.0)));
    }
}
