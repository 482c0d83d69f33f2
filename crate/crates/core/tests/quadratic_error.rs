use shrinkerlab::flow::FlowBase;
use shrinkerlab::soliton::{build_cylinder, build_sphere, find_torus, SolitonKind, SymmetricSoliton, TorusConfig};

fn ratios(s: &SymmetricSoliton, u: &[f64]) -> Vec<f64> {
    let base = FlowBase::new(s).unwrap();
    [1e-1, 1e-2, 1e-3]
        .iter()
        .map(|&sc| {
            let us: Vec<f64> = u.iter().map(|v| v * sc).collect();
            let e = base.error_term(&us).unwrap();
            base.weighted_norm(&e, 0, -1.0).unwrap() / (sc * sc)
        })
        .collect()
}

fn spread(r: &[f64]) -> f64 {
    let hi = r.iter().copied().fold(f64::MIN, f64::max);
    let lo = r.iter().copied().fold(f64::MAX, f64::min);
    (hi - lo) / hi
}

#[test]
fn error_term_is_quadratic_on_model_shrinkers() {
    let sphere = build_sphere(2, 400).unwrap();
    let cyl = build_cylinder(2, 8.0, 400).unwrap();
    let torus = find_torus(2, [3.2, 3.4], 1e-3, &TorusConfig { m: 1600, ..Default::default() }).unwrap();
    for s in [&sphere, &cyl, &torus] {
        let u: Vec<f64> = s
            .points
            .iter()
            .map(|p| match s.kind {
                SolitonKind::Cylinder => (-p.x * p.x / 8.0).exp(),
                // the torus admits only small graphs
                SolitonKind::Torus => 0.25 * (1.0 + 0.15 * p.x),
                _ => 1.0 + 0.15 * p.x,
            })
            .collect();
        let r = ratios(s, &u);
        assert!(r.iter().all(|v| v.is_finite() && *v > 0.0), "{:?} {r:?}", s.kind);
        assert!(spread(&r) < 0.1, "{:?} {r:?}", s.kind);
    }
}

#[test]
fn error_term_vanishes_at_zero() {
    let s = build_sphere(2, 200).unwrap();
    let base = FlowBase::new(&s).unwrap();
    let e = base.error_term(&vec![0.0; base.len()]).unwrap();
    assert!(e.iter().all(|v| v.abs() < 1e-14));
}
