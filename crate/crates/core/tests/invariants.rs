use std::sync::LazyLock;

use proptest::prelude::*;
use shrinkerlab::ancient::{iota_minus, star_norm, AncientConfig, AncientSeed};
use shrinkerlab::avoidance::{conformal_distance, radial_distance, ConformalField, DistanceOptions};
use shrinkerlab::density::{backward_kernel, SpacetimePoint};
use shrinkerlab::flow::FlowBase;
use shrinkerlab::io::format_float;
use shrinkerlab::linalg::SymTridiag;
use shrinkerlab::modes::{linear_trajectory, track_modes};
use shrinkerlab::parallel::Parallelism;
use shrinkerlab::soliton::{build_round_sphere, build_sphere};
use shrinkerlab::spectrum::{eigensolve, project, Relation, Spectrum};

static SPHERE: LazyLock<(FlowBase, Spectrum)> = LazyLock::new(|| {
    let s = build_sphere(2, 200).unwrap();
    (FlowBase::new(&s).unwrap(), eigensolve(&s, 8).unwrap())
});

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn csv_floats_round_trip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn field_is_positive_exactly_inside_its_ball(
        x in -8.0..8.0f64, r in 0.0..8.0f64, t in -1.0..3.0f64, alpha in 0.0..2.0f64,
    ) {
        let f = ConformalField::new(2, 5.0, alpha, 0.5, 0.0).unwrap();
        let u = f.value_xr(x, r, t);
        let inside = (x - 0.5).powi(2) + r * r < f.support_radius2(t);
        prop_assert!(u >= 0.0);
        prop_assert_eq!(u > 0.0, inside);
    }

    #[test]
    fn radial_distance_is_a_metric_on_concentric_spheres(
        mut radii in prop::collection::vec(0.1..4.5f64, 3), t in 0.0..0.5f64,
    ) {
        radii.sort_by(f64::total_cmp);
        let f = ConformalField::new(2, 5.0, 0.0, 0.0, 0.0).unwrap();
        let spheres: Vec<_> = radii.iter().map(|r| build_round_sphere(2, *r, 32).unwrap()).collect();
        let o = DistanceOptions::default();
        let d = |i: usize, j: usize| conformal_distance(&spheres[i], &spheres[j], &f, t, &o).unwrap().value;
        let rho = f.support_radius(t);
        for i in 0..3 {
            for j in 0..3 {
                prop_assert_eq!(d(i, j), d(j, i));
                if radii[i] < rho && radii[j] < rho {
                    let exact = radial_distance(&f, t, radii[i], radii[j]);
                    prop_assert!((d(i, j) - exact).abs() <= 1e-12 * exact.max(1.0));
                }
            }
        }
        prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-12);
    }

    #[test]
    fn backward_kernel_is_positive_before_t0(x in -3.0..3.0f64, r in 0.0..3.0f64, t in -2.0..0.99f64) {
        let p = SpacetimePoint { axial: 0.2, t0: 1.0 };
        let k = backward_kernel(&p, &[x, r, 0.0], t).unwrap();
        prop_assert!(k > 0.0 && k.is_finite());
    }

    #[test]
    fn tridiagonal_solve_inverts_matvec(
        d in prop::collection::vec(3.0..5.0f64, 20), e in prop::collection::vec(-1.0..1.0f64, 19),
        b in prop::collection::vec(-1.0..1.0f64, 20), corner in prop::option::of(-1.0..1.0f64),
    ) {
        let t = SymTridiag { d, e, corner };
        let x = t.solve(&b).unwrap();
        for (p, q) in t.matvec(&x).iter().zip(&b) {
            prop_assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn projections_satisfy_parseval(c in prop::collection::vec(-1.0..1.0f64, 8), mu_idx in 0usize..4) {
        let (base, spec) = &*SPHERE;
        let coeffs: Vec<(usize, f64)> = c.iter().copied().enumerate().collect();
        let traj = linear_trajectory(spec, &coeffs, &[0.0, 0.5]).unwrap();
        let track = track_modes(&traj, base, spec, spec.lambdas[mu_idx]).unwrap();
        prop_assert!(track.parseval_defect() < 1e-10);
        let u = &traj.states[0].u;
        let lo = project(spec, u, Relation::Lt, spec.lambdas[mu_idx]).unwrap();
        let hi = project(spec, u, Relation::Ge, spec.lambdas[mu_idx]).unwrap();
        prop_assert!(lo.iter().zip(&hi).zip(u).all(|((a, b), v)| (a + b - v).abs() < 1e-10));
    }

    #[test]
    fn single_mode_tracks_shift_linearly_in_log(j in 0usize..6, c in 0.1..2.0f64, shift in -2.0..2.0f64) {
        let (base, spec) = &*SPHERE;
        let taus = [0.0, 0.25, 0.5];
        let shifted: Vec<f64> = taus.iter().map(|t| t + shift).collect();
        let a = linear_trajectory(spec, &[(j, c)], &taus).unwrap();
        let b = linear_trajectory(spec, &[(j, c)], &shifted).unwrap();
        let ta = track_modes(&a, base, spec, 0.0).unwrap();
        let tb = track_modes(&b, base, spec, 0.0).unwrap();
        for k in 0..taus.len() {
            let slope = (tb.total[k].ln() - ta.total[k].ln()) / shift;
            if shift.abs() > 1e-3 {
                prop_assert!((slope + spec.lambdas[j]).abs() < 1e-8, "{} {}", slope, spec.lambdas[j]);
            }
        }
    }

    #[test]
    fn star_norm_is_absolutely_homogeneous(a in -1e-3..1e-3f64, c in -5.0..5.0f64) {
        let (base, spec) = &*SPHERE;
        let cfg = AncientConfig { tau_min: -4.0, dtau: 0.05, parallelism: Parallelism::Sequential, ..Default::default() };
        let seed = AncientSeed::new(&[a, 0.0], base, spec, cfg).unwrap();
        let t = iota_minus(&seed, spec);
        let s1 = star_norm(&t, base, seed.delta0).unwrap().star;
        let s2 = star_norm(&t.scaled(c), base, seed.delta0).unwrap().star;
        prop_assert!((s2 - c.abs() * s1).abs() <= 1e-12 * s2.max(s1).max(1e-300));
    }
}
