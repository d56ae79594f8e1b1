mod common;

use common::*;
use driftlab_core::catalog;
use driftlab_core::girsanov::{drift_energy, verify_bounds};
use driftlab_core::{ControlBox, ControlMesh, DiffusionFamily, DriftFamily, ModelSpec, Policy, Verdict};

#[test]
fn catalog_models_satisfy_the_density_bounds() {
    for s in catalog::all(1.0).unwrap() {
        let d = s.model.dim();
        let policy = Policy::Constant(s.mesh.len() - 1);
        let r = verify_bounds(&s.model, &s.mesh, &policy, &vec![0.0; d], 0.25, 20_000, 100, 41).unwrap();
        assert!(r.passed(), "{}: {r:?}", s.name);
    }
}

fn shear(scale: f64) -> (ModelSpec, ControlMesh) {
    let m = ModelSpec::new(
        1,
        DriftFamily::shear(1),
        DiffusionFamily::scalar(1, 0.5).unwrap(),
        ControlBox::cube(1, -scale, scale).unwrap(),
        10.0,
    )
    .unwrap();
    let mesh = ControlMesh::uniform(m.controls(), &[scale / 2.0]).unwrap();
    (m, mesh)
}

#[test]
fn drift_energy_scales_with_the_square_of_the_control_box() {
    let (m1, mesh1) = shear(1.0);
    let base = drift_energy(&m1, &mesh1, &[0.0], 0.5, 9);
    assert!(base > 0.0 && base <= 2.0);
    for lambda in [0.5, 2.0, 3.0] {
        let (m, mesh) = shear(lambda);
        let c = drift_energy(&m, &mesh, &[0.0], 0.5, 9);
        assert!((c - lambda * lambda * base).abs() <= 1e-12 * c, "lambda {lambda}: {c} vs {base}");
    }
}

#[test]
fn constant_drift_density_matches_the_lognormal_law() {
    let b = 1.0;
    let m = ModelSpec::new(
        1,
        DriftFamily::BoxDrift,
        DiffusionFamily::scalar(1, 1.0).unwrap(),
        ControlBox::cube(1, b, b).unwrap(),
        2.0,
    )
    .unwrap();
    let mesh = ControlMesh::uniform(m.controls(), &[1.0]).unwrap();
    for t in [0.1, 0.5] {
        let r = verify_bounds(&m, &mesh, &Policy::Constant(0), &[0.0], t, 40_000, 200, 77).unwrap();
        assert_eq!(r.energy, b * b);
        assert!((r.bound - (b * b * t).exp()).abs() < 1e-15);
        let exact = lognormal_abs_deviation(b, t);
        assert!((r.abs_deviation.mean - exact).abs() <= 3.0 * r.abs_deviation.se + 1e-2, "t {t}");
        assert_eq!(r.verdicts(), [Verdict::Pass; 3]);
    }
}
