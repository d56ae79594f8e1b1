//! Artifact writers. Every JSON artifact carries the configuration hash;
//! numbers are written in shortest round-trip form so that identical runs
//! give identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use driftlab_core::{ModulusReport, ValueGrid};

use crate::error::CliResult;

/// Sidecar describing a [`ValueGrid`] CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridMeta {
    pub t: f64,
    pub dx: Vec<f64>,
    /// Time step of the explicit scheme, or the backup step of the DP method.
    pub dt: f64,
    pub domain: DomainMeta,
    pub model_hash: String,
    pub method: String,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainMeta {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Ensemble summary of a Monte Carlo estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub x: Vec<f64>,
    pub t: f64,
    pub policy: String,
    pub n_paths: usize,
    pub mean: f64,
    pub se: f64,
    pub seed: u64,
}

/// Collects artifacts written into one output directory.
#[derive(Debug)]
pub struct ArtifactDir {
    root: PathBuf,
    config_hash: String,
    written: Vec<PathBuf>,
}

impl ArtifactDir {
    pub fn create(root: &Path, config_hash: &str) -> CliResult<Self> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), config_hash: config_hash.to_string(), written: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.root.join(name);
        fs::write(&path, bytes)?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn text(&mut self, name: &str, body: &str) -> CliResult<PathBuf> {
        self.write(name, body.as_bytes())
    }

    /// Writes `value` as pretty JSON with a `config_hash` field added at
    /// the top level.
    pub fn json(&mut self, name: &str, value: &impl Serialize) -> CliResult<PathBuf> {
        let mut v = serde_json::to_value(value)?;
        let obj = match v {
            Value::Object(ref mut m) => m,
            other => {
                let mut m = Map::new();
                m.insert("value".into(), other);
                v = Value::Object(m);
                v.as_object_mut().unwrap()
            }
        };
        obj.insert("config_hash".into(), Value::String(self.config_hash.clone()));
        let mut body = serde_json::to_string_pretty(&v)?;
        body.push('\n');
        self.write(name, body.as_bytes())
    }

    /// `<stem>.csv` with header `x1,…,xd,value` and `<stem>.json` sidecar.
    pub fn grid(&mut self, stem: &str, grid: &ValueGrid, meta: &GridMeta) -> CliResult<()> {
        let bytes = grid_csv(grid)?;
        self.write(&format!("{stem}.csv"), &bytes)?;
        self.json(&format!("{stem}.json"), meta)?;
        Ok(())
    }

    /// `<stem>.json` with the full report and `<stem>.csv` with columns
    /// `delta,omega,oracle_omega` (the last empty without a reference).
    pub fn modulus(&mut self, stem: &str, report: &ModulusReport) -> CliResult<()> {
        self.json(&format!("{stem}.json"), report)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["delta", "omega", "oracle_omega"])?;
        for (i, (d, o)) in report.deltas.iter().zip(&report.omega).enumerate() {
            let reference = report.reference.as_ref().map_or(String::new(), |r| r[i].to_string());
            w.write_record([d.to_string(), o.to_string(), reference])?;
        }
        let bytes = w.into_inner().map_err(|e| crate::CliError::Io(e.to_string()))?;
        self.write(&format!("{stem}.csv"), &bytes)?;
        Ok(())
    }
}

/// CSV body of a value grid, one node per line in lattice order.
pub fn grid_csv(grid: &ValueGrid) -> CliResult<Vec<u8>> {
    let lattice = grid.lattice();
    let d = lattice.dim();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (1..=d).map(|k| format!("x{k}")).collect();
    header.push("value".into());
    w.write_record(&header)?;
    let mut x = vec![0.0; d];
    for (node, v) in grid.values().iter().enumerate() {
        lattice.node_into(node, &mut x);
        let mut row: Vec<String> = x.iter().map(f64::to_string).collect();
        row.push(v.to_string());
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| crate::CliError::Io(e.to_string()))
}

/// Reads back a grid CSV as rows of numbers, header skipped.
pub fn read_grid_csv(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| crate::CliError::Io(format!("{}: {e}", path.display()))))
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use driftlab_core::{BoxDomain, Lattice};

    #[test]
    fn grid_csv_has_header_and_one_row_per_node() {
        let lattice = Lattice::new(BoxDomain::cube(2, 0.0, 1.0).unwrap(), &[0.5, 0.5]).unwrap();
        let g = ValueGrid::from_fn(&lattice, 0.0, |x| x[0] + 10.0 * x[1]);
        let text = String::from_utf8(grid_csv(&g).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x1,x2,value");
        assert_eq!(lines.len(), 1 + 9);
        for line in &lines[1..] {
            let f: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
            assert_eq!(f[2], f[0] + 10.0 * f[1]);
        }
    }

    #[test]
    fn json_artifacts_carry_the_config_hash() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = ArtifactDir::create(dir.path(), "abc").unwrap();
        let p = out.json("x.json", &1.5).unwrap();
        let v: Value = serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap();
        assert_eq!(v["config_hash"], "abc");
        assert_eq!(v["value"], 1.5);
    }

    #[test]
    fn modulus_csv_leaves_missing_reference_empty() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = ArtifactDir::create(dir.path(), "h").unwrap();
        let report = ModulusReport {
            t: 0.5,
            psi: "tanh-affine".into(),
            method: "pde",
            deltas: vec![0.1, 0.2],
            omega: vec![0.01, 0.02],
            data_omega: vec![0.1, 0.2],
            monotone: true,
            omega_zero: 0.0,
            reference: None,
        };
        out.modulus("modulus", &report).unwrap();
        let text = fs::read_to_string(dir.path().join("modulus.csv")).unwrap();
        assert_eq!(text, "delta,omega,oracle_omega\n0.1,0.01,\n0.2,0.02,\n");
    }
}
