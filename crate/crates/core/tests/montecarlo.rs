mod common;

use common::*;
use driftlab_core::mc::{constant_policies, lower_bound, simulate};
use driftlab_core::{ControlBox, ControlMesh, DiffusionFamily, DriftFamily, ModelSpec, Policy, TestFunction};

fn box_model(a: f64) -> (ModelSpec, ControlMesh) {
    let m = ModelSpec::new(
        1,
        DriftFamily::BoxDrift,
        DiffusionFamily::scalar(1, a).unwrap(),
        ControlBox::cube(1, -1.0, 1.0).unwrap(),
        2.0,
    )
    .unwrap();
    let mesh = ControlMesh::uniform(m.controls(), &[1.0]).unwrap();
    (m, mesh)
}

#[test]
fn constant_drift_endpoints_have_the_gaussian_moments() {
    let (m, mesh) = box_model(1.5);
    let (x, t, n) = (0.3, 0.8, 40_000);
    for (k, f) in mesh.points().map(|f| f[0]).enumerate() {
        let ens = simulate(&m, &mesh, &Policy::Constant(k), &[x], t, n, 20, 11).unwrap();
        let ys: Vec<f64> = ens.endpoints().map(|e| e[0]).collect();
        let mean = ys.iter().sum::<f64>() / n as f64;
        let var = ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / (n - 1) as f64;
        let (m_exact, v_exact) = (x + f * t, 1.5 * t);
        assert!((mean - m_exact).abs() < 4.0 * (v_exact / n as f64).sqrt(), "f = {f}: mean {mean}");
        assert!((var - v_exact).abs() < 4.0 * v_exact * (2.0 / n as f64).sqrt(), "f = {f}: var {var}");
    }
}

#[test]
fn tanh_lower_bound_matches_the_top_drift_integral() {
    let (m, mesh) = box_model(1.0);
    let (x, t) = (0.2, 0.5);
    let lb = lower_bound(&m, &mesh, &TestFunction::tanh(1), &[x], t, &constant_policies(&mesh), 20_000, 200, 3).unwrap();
    assert_eq!(mesh.point(lb.best_policy), &[1.0]);
    let exact = tanh_with_top_drift(x, t);
    assert!((lb.value - exact).abs() <= 3.0 * lb.se + 5e-3, "{} vs {exact}", lb.value);
}

#[test]
fn constant_datum_gives_an_exact_bound() {
    let (m, mesh) = box_model(1.0);
    let lb = lower_bound(&m, &mesh, &TestFunction::Constant(0.4), &[0.0], 1.0, &constant_policies(&mesh), 500, 10, 1).unwrap();
    assert_eq!((lb.value, lb.se, lb.best_policy), (0.4, 0.0, 0));
}

#[test]
fn seeds_reproduce_and_separate_ensembles() {
    let (m, mesh) = box_model(1.0);
    let run = |seed| simulate(&m, &mesh, &Policy::Constant(0), &[0.0], 1.0, 300, 25, seed).unwrap().endpoints;
    assert_eq!(run(5), run(5));
    assert_ne!(run(5), run(6));
}

#[test]
fn switching_policy_interpolates_between_constants() {
    let (m, mesh) = box_model(1.0);
    let p = Policy::PiecewiseConstant { switch_times: vec![0.5], controls: vec![0, 2] };
    let ens = simulate(&m, &mesh, &p, &[0.0], 1.0, 20_000, 40, 8).unwrap();
    let mean = ens.endpoints().map(|e| e[0]).sum::<f64>() / 20_000.0;
    // drift −1 then +1 for half a unit each
    assert!(mean.abs() < 4.0 / 20_000f64.sqrt(), "{mean}");
}
