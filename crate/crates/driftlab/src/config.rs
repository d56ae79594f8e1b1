//! Run configuration: a TOML file with `model`, `grid`, `control`,
//! `function` and `command` blocks. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use driftlab_core::{
    BoxDomain, ControlBox, ControlMesh, DiffusionFamily, DriftFamily, ExplicitScheme, Expr, GridSpec, Method, ModelSpec,
    TestFunction,
};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; `0` or absent means one per available core.
    #[serde(default)]
    pub workers: usize,
    pub model: ModelBlock,
    pub grid: GridBlock,
    pub control: ControlBlock,
    pub function: FunctionBlock,
    pub command: CommandBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub dim: usize,
    pub bound_c: f64,
    pub drift: DriftBlock,
    pub diffusion: DiffusionBlock,
    pub controls: IntervalBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DriftBlock {
    /// `b(f, x) = f`
    BoxDrift,
    /// `b(f, x) = f · tanh(x₁) e₁`
    ShearDrift,
    /// `b(f, x) = A(x) f + c(x)` with `A` given row by row.
    AffineDrift { matrix: Vec<Vec<ExprConfig>>, offset: Vec<ExprConfig> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DiffusionBlock {
    /// `a ≡ value · I`
    ScalarDiffusion { value: f64 },
    /// Constant symmetric positive definite matrix, row by row.
    ConstDiffusion { matrix: Vec<Vec<f64>> },
    /// `a(x) = diag(g_i(x))`, clamped into `[1/C, C]` unless `clamp = false`.
    DiagDiffusion {
        g: Vec<ExprConfig>,
        #[serde(default = "yes")]
        clamp: bool,
    },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExprConfig {
    Const { value: f64 },
    Tanh { axis: usize, #[serde(default = "one")] scale: f64, #[serde(default = "one")] amp: f64 },
    Sin { axis: usize, #[serde(default = "one")] scale: f64, #[serde(default = "one")] amp: f64 },
    Cos { axis: usize, #[serde(default = "one")] scale: f64, #[serde(default = "one")] amp: f64 },
    Square { axis: usize, #[serde(default = "one")] amp: f64 },
    Sum { terms: Vec<ExprConfig> },
}

fn one() -> f64 {
    1.0
}

impl ExprConfig {
    fn build(&self) -> Expr {
        match self {
            ExprConfig::Const { value } => Expr::Const(*value),
            ExprConfig::Tanh { axis, scale, amp } => Expr::Tanh { axis: *axis, scale: *scale, amp: *amp },
            ExprConfig::Sin { axis, scale, amp } => Expr::Sin { axis: *axis, scale: *scale, amp: *amp },
            ExprConfig::Cos { axis, scale, amp } => Expr::Cos { axis: *axis, scale: *scale, amp: *amp },
            ExprConfig::Square { axis, amp } => Expr::Square { axis: *axis, amp: *amp },
            ExprConfig::Sum { terms } => Expr::Sum(terms.iter().map(ExprConfig::build).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub dx: Vec<f64>,
    /// Explicit time step; absent means the largest step allowed by the
    /// monotonicity bound.
    #[serde(default)]
    pub dt: Option<f64>,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlBlock {
    pub resolution: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionBlock {
    Constant { value: f64 },
    TanhAffine { w: Vec<f64>, #[serde(default)] c: f64, #[serde(default = "one")] amp: f64 },
    GaussianBump { center: Vec<f64>, #[serde(default = "one")] width: f64, #[serde(default = "one")] height: f64 },
    IndicatorHalfspace { w: Vec<f64>, #[serde(default)] c: f64 },
    IndicatorBall { center: Vec<f64>, radius: f64 },
    PiecewiseLinearCapped { w: Vec<f64>, #[serde(default)] c: f64, cap: f64 },
}

impl FunctionBlock {
    pub fn build(&self) -> TestFunction {
        match self.clone() {
            FunctionBlock::Constant { value } => TestFunction::Constant(value),
            FunctionBlock::TanhAffine { w, c, amp } => TestFunction::TanhAffine { w, c, amp },
            FunctionBlock::GaussianBump { center, width, height } => {
                TestFunction::GaussianBump { center, width, height }
            }
            FunctionBlock::IndicatorHalfspace { w, c } => TestFunction::IndicatorHalfspace { w, c },
            FunctionBlock::IndicatorBall { center, radius } => TestFunction::IndicatorBall { center, radius },
            FunctionBlock::PiecewiseLinearCapped { w, c, cap } => TestFunction::PiecewiseLinearCapped { w, c, cap },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    Pde,
    Dp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodBlock {
    #[serde(default = "pde")]
    pub method: MethodName,
    /// Backup step of the DP method; absent means a quarter of the spacing.
    #[serde(default)]
    pub dp_step: Option<f64>,
    #[serde(default)]
    pub dp_order: Option<usize>,
}

fn pde() -> MethodName {
    MethodName::Pde
}

impl MethodBlock {
    pub fn build(&self) -> Method {
        match self.method {
            MethodName::Pde => Method::Pde,
            MethodName::Dp => Method::Dp {
                step: self.dp_step,
                order: self.dp_order.unwrap_or(driftlab_core::dp::DEFAULT_ORDER),
            },
        }
    }
}

/// Which policies the Monte Carlo lower bound tries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicySet {
    /// Constant controls at the vertices of the control box.
    Vertices,
    /// Every mesh point as a constant control.
    Mesh,
    /// Vertices plus the DP feedback table.
    Feedback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CommandBlock {
    CheckConditions {
        #[serde(default = "default_samples")]
        samples: usize,
    },
    SolvePde {
        t: f64,
        /// Compare against the closed-form solution when one exists.
        #[serde(default)]
        oracle: bool,
        #[serde(default = "default_oracle_tol")]
        tolerance: f64,
    },
    SolveDp {
        t: f64,
        #[serde(default)]
        dp_step: Option<f64>,
        #[serde(default)]
        dp_order: Option<usize>,
        #[serde(default)]
        oracle: bool,
        #[serde(default = "default_oracle_tol")]
        tolerance: f64,
    },
    SemigroupGap {
        s: f64,
        t: f64,
        #[serde(default = "pde")]
        method: MethodName,
        #[serde(default)]
        dp_step: Option<f64>,
        #[serde(default)]
        dp_order: Option<usize>,
        #[serde(default = "default_gap_tol")]
        tolerance: f64,
    },
    AxiomSuite {
        times: Vec<f64>,
        #[serde(default = "default_pairs")]
        pairs: usize,
        #[serde(default = "default_pool")]
        pool: usize,
        #[serde(default = "pde")]
        method: MethodName,
        #[serde(default)]
        dp_step: Option<f64>,
        #[serde(default)]
        dp_order: Option<usize>,
    },
    FellerReport {
        t: f64,
        deltas: Vec<f64>,
        #[serde(default = "pde")]
        method: MethodName,
        #[serde(default)]
        dp_step: Option<f64>,
        #[serde(default)]
        dp_order: Option<usize>,
        #[serde(default = "default_gap_tol")]
        tolerance: f64,
    },
    McLowerBound {
        x: Vec<f64>,
        t: f64,
        n_paths: usize,
        n_steps: usize,
        #[serde(default = "default_policies")]
        policies: PolicySet,
        /// Compare with the DP value at `x`.
        #[serde(default = "yes")]
        compare_dp: bool,
        #[serde(default = "default_gap_tol")]
        tolerance: f64,
    },
    GirsanovCheck {
        x: Vec<f64>,
        t: f64,
        n_paths: usize,
        #[serde(default = "default_girsanov_steps")]
        n_steps: usize,
        /// Index into the control mesh of the constant policy.
        #[serde(default)]
        control: usize,
    },
    ResidualStudy {
        times: Vec<f64>,
        #[serde(default)]
        tolerance: Option<f64>,
    },
}

fn default_samples() -> usize {
    2000
}
fn default_oracle_tol() -> f64 {
    5e-3
}
fn default_gap_tol() -> f64 {
    1e-2
}
fn default_pairs() -> usize {
    50
}
fn default_pool() -> usize {
    40
}
fn default_policies() -> PolicySet {
    PolicySet::Feedback
}
fn default_girsanov_steps() -> usize {
    400
}

impl CommandBlock {
    pub fn name(&self) -> &'static str {
        match self {
            CommandBlock::CheckConditions { .. } => "check-conditions",
            CommandBlock::SolvePde { .. } => "solve-pde",
            CommandBlock::SolveDp { .. } => "solve-dp",
            CommandBlock::SemigroupGap { .. } => "semigroup-gap",
            CommandBlock::AxiomSuite { .. } => "axiom-suite",
            CommandBlock::FellerReport { .. } => "feller-report",
            CommandBlock::McLowerBound { .. } => "mc-lower-bound",
            CommandBlock::GirsanovCheck { .. } => "girsanov-check",
            CommandBlock::ResidualStudy { .. } => "residual-study",
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let mut path = e.path().to_string();
            let message = e.into_inner().message().trim().to_string();
            // tagged blocks are buffered, so the reported path stops at the
            // block; recover the full path of an unknown key from the tree
            if let (Some(key), Ok(root)) = (unknown_field(&message), text.parse::<toml::Table>()) {
                let mut hits = Vec::new();
                find_key(&toml::Value::Table(root), key, String::new(), &mut hits);
                if let Some(full) = hits.into_iter().find(|h| h.starts_with(&path)) {
                    path = full;
                }
            }
            CliError::Config { path, message }
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Canonical TOML rendering of the effective configuration.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("configuration always serialises")
    }

    /// SHA-256 of the canonical rendering with the worker count cleared,
    /// since results do not depend on it.
    pub fn hash(&self) -> String {
        let canonical = RunConfig { workers: 0, ..self.clone() };
        sha256_hex(canonical.echo().as_bytes())
    }

    /// SHA-256 of the canonical model block.
    pub fn model_hash(&self) -> String {
        sha256_hex(toml::to_string(&self.model).expect("model block serialises").as_bytes())
    }

    pub fn build_model(&self) -> CliResult<ModelSpec> {
        let m = &self.model;
        let d = m.dim;
        let drift = match &m.drift {
            DriftBlock::BoxDrift => DriftFamily::BoxDrift,
            DriftBlock::ShearDrift => DriftFamily::shear(d),
            DriftBlock::AffineDrift { matrix, offset } => {
                let control_dim = matrix.first().map_or(0, Vec::len);
                if matrix.len() != d || matrix.iter().any(|r| r.len() != control_dim) {
                    return Err(CliError::config("model.drift.matrix", format!("expected {d} rows of equal length")));
                }
                DriftFamily::Affine {
                    matrix: matrix.iter().flatten().map(ExprConfig::build).collect(),
                    offset: offset.iter().map(ExprConfig::build).collect(),
                    control_dim,
                }
            }
        };
        let diffusion = match &m.diffusion {
            DiffusionBlock::ScalarDiffusion { value } => DiffusionFamily::scalar(d, *value)?,
            DiffusionBlock::ConstDiffusion { matrix } => {
                if matrix.len() != d || matrix.iter().any(|r| r.len() != d) {
                    return Err(CliError::config("model.diffusion.matrix", format!("expected a {d}×{d} matrix")));
                }
                DiffusionFamily::constant(d, matrix.iter().flatten().copied().collect())?
            }
            DiffusionBlock::DiagDiffusion { g, clamp } => {
                DiffusionFamily::Diagonal { g: g.iter().map(ExprConfig::build).collect(), clamp: *clamp }
            }
        };
        let controls = ControlBox::new(m.controls.lo.clone(), m.controls.hi.clone())?;
        Ok(ModelSpec::new(d, drift, diffusion, controls, m.bound_c)?)
    }

    pub fn build_mesh(&self, model: &ModelSpec) -> CliResult<ControlMesh> {
        Ok(ControlMesh::uniform(model.controls(), &self.control.resolution)?)
    }

    pub fn build_domain(&self) -> CliResult<BoxDomain> {
        Ok(BoxDomain::new(self.grid.lo.clone(), self.grid.hi.clone())?)
    }

    /// Grid with the configured time step, or the monotonicity bound of the
    /// explicit scheme when none is given. A configured step above the
    /// bound is rejected.
    pub fn build_grid(&self, model: &ModelSpec, mesh: &ControlMesh) -> CliResult<GridSpec> {
        let g = &self.grid;
        let provisional = GridSpec::new(self.build_domain()?, &g.dx, f64::MIN_POSITIVE, g.t_end)?;
        match g.dt {
            Some(dt) => {
                let grid = provisional.with_dt(dt)?;
                ExplicitScheme::new(model, mesh, grid.clone())?;
                Ok(grid)
            }
            None => {
                let bound = ExplicitScheme::new(model, mesh, provisional.clone())?.cfl_bound();
                Ok(provisional.with_dt(bound)?)
            }
        }
    }
}

fn unknown_field(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("unknown field `")?;
    rest.split('`').next()
}

fn find_key(value: &toml::Value, key: &str, at: String, hits: &mut Vec<String>) {
    match value {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let here = if at.is_empty() { k.clone() } else { format!("{at}.{k}") };
                if k == key {
                    hits.push(here.clone());
                }
                find_key(v, key, here, hits);
            }
        }
        toml::Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                find_key(v, key, format!("{at}[{i}]"), hits);
            }
        }
        _ => {}
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEAT: &str = r#"
seed = 3
[model]
dim = 1
bound_c = 2.0
drift = { family = "box-drift" }
diffusion = { family = "scalar-diffusion", value = 1.0 }
controls = { lo = [0.0], hi = [0.0] }
[grid]
lo = [-4.0]
hi = [4.0]
dx = [0.05]
t_end = 1.0
[control]
resolution = [0.5]
[function]
kind = "gaussian-bump"
center = [0.0]
[command]
name = "solve-pde"
t = 0.5
"#;

    #[test]
    fn parses_and_echoes_losslessly() {
        let c = RunConfig::from_toml(HEAT).unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(RunConfig::from_toml(&c.echo()).unwrap(), c);
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn unknown_key_reports_its_path() {
        let bad = HEAT.replace("t = 0.5", "t = 0.5\nhorizon = 2");
        match RunConfig::from_toml(&bad) {
            Err(CliError::Config { path, message }) => {
                assert_eq!(path, "command.horizon");
                assert!(message.contains("horizon"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_family_reports_its_path() {
        let bad = HEAT.replace(r#"family = "box-drift""#, r#"family = "spiral""#);
        match RunConfig::from_toml(&bad) {
            Err(CliError::Config { path, message }) => {
                assert_eq!(path, "model.drift.family");
                assert!(message.contains("spiral"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hash_ignores_the_worker_count() {
        let c = RunConfig::from_toml(HEAT).unwrap();
        let busy = RunConfig { workers: 8, ..c.clone() };
        assert_eq!(c.hash(), busy.hash());
        assert_ne!(c.hash(), RunConfig { seed: 4, ..c }.hash());
    }

    #[test]
    fn step_above_the_bound_is_rejected() {
        let c = RunConfig::from_toml(&HEAT.replace("t_end = 1.0", "dt = 0.01\nt_end = 1.0")).unwrap();
        let m = c.build_model().unwrap();
        let mesh = c.build_mesh(&m).unwrap();
        let err = c.build_grid(&m, &mesh).unwrap_err().to_string();
        assert!(err.contains("0.0025"), "{err}");
    }

    #[test]
    fn missing_dt_uses_the_monotonicity_bound() {
        let c = RunConfig::from_toml(HEAT).unwrap();
        let m = c.build_model().unwrap();
        let mesh = c.build_mesh(&m).unwrap();
        let g = c.build_grid(&m, &mesh).unwrap();
        assert!((g.dt() - 0.0025).abs() < 1e-15);
    }
}
