mod common;

use common::*;
use driftlab_core::catalog;
use driftlab_core::{Error, Method, Semigroup, TestFunction, ValueGrid};

fn box_semigroup(method: Method) -> Semigroup {
    let s = catalog::box_drift(0.5).unwrap();
    Semigroup::new(&s.model, &s.mesh, &s.grid, method).unwrap()
}

#[test]
fn nested_balls_stay_ordered() {
    for method in [Method::Pde, Method::dp()] {
        let sg = box_semigroup(method);
        let small = TestFunction::IndicatorBall { center: vec![0.0], radius: 0.5 };
        let large = TestFunction::IndicatorBall { center: vec![0.2], radius: 1.0 };
        let c = sg.comparison_test(&small, &large, 0.3).unwrap();
        assert!(c.pass && c.max_gap > 0.1, "{}: {c:?}", method.tag());
    }
}

#[test]
fn adding_a_bump_raises_the_value() {
    let sg = box_semigroup(Method::Pde);
    let lower = ValueGrid::sample(sg.lattice(), &TestFunction::tanh(1));
    let bump = ValueGrid::sample(sg.lattice(), &TestFunction::bump(1));
    let upper = lower.zip_with(&bump, |a, b| a + b);
    let c = sg.compare_grids(&lower, &upper, 0.5).unwrap();
    assert!(c.pass, "{c:?}");
    assert!(c.min_gap >= -1e-12);
}

#[test]
fn comparison_rejects_unordered_data() {
    let sg = box_semigroup(Method::Pde);
    assert!(sg.comparison_test(&TestFunction::bump(1), &TestFunction::tanh(1), 0.1).is_err());
}

#[test]
fn planar_semigroup_satisfies_the_axioms() {
    let s = catalog::planar(0.1).unwrap();
    let sg = Semigroup::new(&s.model, &s.mesh, &s.grid, Method::dp()).unwrap();
    let pool = TestFunction::random_pool(2, 6, 3);
    let report = sg.axiom_suite(&pool, &[0.05, 0.1], 3, 4).unwrap();
    assert!(report.passed(), "{report:?}");
    assert_eq!(report.checks.len(), 5);
}

#[test]
fn halfspace_modulus_tracks_the_closed_form() {
    let sg = box_semigroup(Method::dp());
    let psi = TestFunction::IndicatorHalfspace { w: vec![-1.0], c: 0.0 };
    let r = sg.feller_modulus(&psi, 0.25, &[0.4, 0.2, 0.1]).unwrap();
    assert!(r.monotone);
    assert!(r.data_omega.iter().all(|w| *w == 1.0));
    let exact: Vec<f64> = r
        .deltas
        .iter()
        .map(|d| window_modulus(|x| 1.0 - halfspace_with_bottom_drift(x, 0.25), -4.0, 4.0, *d))
        .collect();
    for (got, want) in r.omega.iter().zip(&exact) {
        assert!((got - want).abs() < 1.5e-2, "{got} vs {want}");
    }
}

#[test]
fn semigroup_identity_holds_for_both_methods() {
    for method in [Method::Pde, Method::dp()] {
        let gap = box_semigroup(method).semigroup_gap(&TestFunction::bump(1), 0.2, 0.3).unwrap();
        assert!(gap < 1e-9, "{}: {gap}", method.tag());
    }
}

#[test]
fn time_zero_is_sampling() {
    let sg = box_semigroup(Method::dp());
    let psi = TestFunction::halfspace(1);
    assert_eq!(sg.apply(&psi, 0.0).unwrap(), ValueGrid::sample(sg.lattice(), &psi));
    assert_eq!(sg.feller_modulus(&psi, 0.0, &[0.1]), Err(Error::ZeroHorizon));
}

#[test]
fn heat_flow_is_linear() {
    let s = catalog::heat(0.5).unwrap();
    let sg = Semigroup::new(&s.model, &s.mesh, &s.grid, Method::Pde).unwrap();
    let a = ValueGrid::sample(sg.lattice(), &TestFunction::tanh(1));
    let b = ValueGrid::sample(sg.lattice(), &TestFunction::bump(1));
    let sum = sg.apply_grid(&a.zip_with(&b, |p, q| p - q), 0.5).unwrap();
    let parts = sg.apply_grid(&a, 0.5).unwrap().zip_with(&sg.apply_grid(&b, 0.5).unwrap(), |p, q| p - q);
    assert!(sum.zip_with(&parts, |p, q| p - q).sup_abs() < 1e-12);
    let v = sg.apply(&TestFunction::bump(1), 0.5).unwrap();
    assert!(v.max_abs_error_on(&v.lattice().domain().middle_half(), |x| heat_bump(x[0], 0.5)) < 1e-4);
}
