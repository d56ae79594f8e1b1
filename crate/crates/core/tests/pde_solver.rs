mod common;

use common::*;
use driftlab_core::catalog;
use driftlab_core::pde::residual;
use driftlab_core::{ExplicitScheme, Method, Semigroup, TestFunction, ValueGrid};

fn middle_error(v: &ValueGrid, exact: impl Fn(f64) -> f64) -> f64 {
    let region = v.lattice().domain().middle_half();
    v.max_abs_error_on(&region, |x| exact(x[0]))
}

#[test]
fn heat_flow_of_a_bump_matches_the_gaussian_integral() {
    let s = catalog::heat(1.0).unwrap();
    let sg = Semigroup::new(&s.model, &s.mesh, &s.grid, Method::Pde).unwrap();
    for t in [0.25, 1.0] {
        let err = middle_error(&sg.apply(&TestFunction::bump(1), t).unwrap(), |x| heat_bump(x, t));
        assert!(err < 1e-4, "t = {t}: {err}");
    }
}

#[test]
fn halfspace_under_box_drift_converges_to_the_normal_cdf() {
    let s = catalog::box_drift(0.5).unwrap();
    let psi = TestFunction::IndicatorHalfspace { w: vec![1.0], c: 0.0 };
    let err = |grid: &driftlab_core::GridSpec| {
        let sg = Semigroup::new(&s.model, &s.mesh, grid, Method::Pde).unwrap();
        middle_error(&sg.apply(&psi, 0.5).unwrap(), |x| halfspace_with_bottom_drift(x, 0.5))
    };
    let (coarse, fine) = (err(&s.grid), err(&s.grid.refined().unwrap()));
    assert!(coarse < 2e-2, "{coarse}");
    assert!(fine < 0.6 * coarse, "{coarse} -> {fine}");
}

#[test]
fn tanh_under_box_drift_follows_the_top_control() {
    let s = catalog::box_drift(1.0).unwrap();
    let sg = Semigroup::new(&s.model, &s.mesh, &s.grid, Method::Pde).unwrap();
    let err = middle_error(&sg.apply(&TestFunction::tanh(1), 1.0).unwrap(), |x| tanh_with_top_drift(x, 1.0));
    assert!(err < 5e-3, "{err}");
}

#[test]
fn residual_shrinks_under_refinement() {
    let s = catalog::heat(0.5).unwrap();
    let times = [0.3, 0.31, 0.32];
    let sup = |grid| {
        let scheme = ExplicitScheme::new(&s.model, &s.mesh, grid).unwrap();
        let u0 = ValueGrid::sample(scheme.lattice(), &TestFunction::tanh(1));
        residual(&scheme, &scheme.solve_slices(&u0, &times).unwrap()).unwrap().interior_sup
    };
    let (a, b) = (sup(s.grid.clone()), sup(s.grid.refined().unwrap()));
    assert!(b < a / 1.5, "{a} -> {b}");
}

#[test]
fn constant_data_have_zero_residual() {
    let s = catalog::box_drift(0.5).unwrap();
    let scheme = ExplicitScheme::new(&s.model, &s.mesh, s.grid.clone()).unwrap();
    let u0 = ValueGrid::sample(scheme.lattice(), &TestFunction::Constant(2.5));
    let r = residual(&scheme, &scheme.solve_slices(&u0, &[0.1, 0.2, 0.3]).unwrap()).unwrap();
    assert_eq!(r.interior_sup, 0.0);
}

#[test]
fn solution_operator_is_nonexpansive() {
    let s = catalog::box_drift(0.25).unwrap();
    let sg = Semigroup::new(&s.model, &s.mesh, &s.grid, Method::Pde).unwrap();
    let pool = TestFunction::random_pool(1, 8, 17);
    for pair in pool.chunks(2) {
        let (a, b) = (ValueGrid::sample(sg.lattice(), &pair[0]), ValueGrid::sample(sg.lattice(), &pair[1]));
        let data_gap = a.zip_with(&b, |p, q| p - q).sup_abs();
        let (ta, tb) = (sg.apply_grid(&a, 0.25).unwrap(), sg.apply_grid(&b, 0.25).unwrap());
        assert!(ta.zip_with(&tb, |p, q| p - q).sup_abs() <= data_gap + 1e-12);
    }
}

#[test]
fn planar_solution_respects_the_data_range() {
    let s = catalog::planar(0.25).unwrap();
    let sg = Semigroup::new(&s.model, &s.mesh, &s.grid, Method::Pde).unwrap();
    let psi = TestFunction::IndicatorBall { center: vec![0.0, 0.0], radius: 1.0 };
    let v = sg.apply(&psi, 0.25).unwrap();
    assert!(v.min() >= 0.0 && v.max() <= 1.0);
    assert!(v.interpolate(&[0.0, 0.0]) > 0.5);
}
