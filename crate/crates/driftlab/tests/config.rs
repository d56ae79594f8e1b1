use std::fs;
use std::path::{Path, PathBuf};

use driftlab::{CliError, RunConfig};

fn shipped() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut v: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn shipped_configs_parse_build_and_echo_losslessly() {
    let files = shipped();
    assert!(files.len() >= 9);
    for p in files {
        let c = RunConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(RunConfig::from_toml(&c.echo()).unwrap(), c, "{}", p.display());
        let model = c.build_model().unwrap();
        let mesh = c.build_mesh(&model).unwrap();
        c.build_grid(&model, &mesh).unwrap();
        c.function.build().validate(model.dim()).unwrap();
    }
}

#[test]
fn shipped_configs_cover_every_command() {
    let names: std::collections::BTreeSet<&str> =
        shipped().iter().map(|p| RunConfig::load(p).unwrap().command.name()).collect();
    for cmd in [
        "check-conditions",
        "solve-pde",
        "solve-dp",
        "semigroup-gap",
        "axiom-suite",
        "feller-report",
        "mc-lower-bound",
        "girsanov-check",
        "residual-study",
    ] {
        assert!(names.contains(cmd), "no config runs {cmd}");
    }
}

#[test]
fn schema_document_names_every_command_and_family() {
    let doc = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/config-schema.md")).unwrap();
    for word in [
        "check-conditions",
        "solve-pde",
        "solve-dp",
        "semigroup-gap",
        "axiom-suite",
        "feller-report",
        "mc-lower-bound",
        "girsanov-check",
        "residual-study",
        "box-drift",
        "affine-drift",
        "shear-drift",
        "const-diffusion",
        "scalar-diffusion",
        "diag-diffusion",
        "tanh-affine",
        "gaussian-bump",
        "indicator-halfspace",
        "indicator-ball",
        "piecewise-linear-capped",
    ] {
        assert!(doc.contains(&format!("`{word}`")), "schema does not document {word}");
    }
}

#[test]
fn nested_errors_report_the_full_path() {
    let text = fs::read_to_string(shipped().into_iter().find(|p| p.ends_with("planar-conditions.toml")).unwrap())
        .unwrap()
        .replace(r#"{ kind = "sin", axis = 0, amp = 0.25 }"#, r#"{ kind = "sin", axis = 0, amp = 0.25, phase = 1.0 }"#);
    match RunConfig::from_toml(&text) {
        Err(CliError::Config { path, message }) => {
            assert_eq!(path, "model.diffusion.g[0].terms[1].phase");
            assert!(message.contains("phase"), "{message}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn shape_errors_name_the_block() {
    let text = fs::read_to_string(shipped().into_iter().find(|p| p.ends_with("planar-conditions.toml")).unwrap())
        .unwrap()
        .replace("dim = 2", "dim = 1");
    let c = RunConfig::from_toml(&text).unwrap();
    let err = c.build_model().unwrap_err().to_string();
    assert!(err.contains("model.drift.matrix"), "{err}");
}

#[test]
fn missing_command_is_reported() {
    let text = fs::read_to_string(&shipped()[0]).unwrap();
    let cut = text.find("[command]").unwrap();
    match RunConfig::from_toml(&text[..cut]) {
        Err(CliError::Config { message, .. }) => assert!(message.contains("command"), "{message}"),
        other => panic!("{other:?}"),
    }
}
