//! Built-in models with their control meshes and grids.

use alloc::vec;

use crate::error::Result;
use crate::grid::{BoxDomain, GridSpec};
use crate::model::{ControlBox, ControlMesh, DiffusionFamily, DriftFamily, Expr, ModelSpec};
use crate::pde::ExplicitScheme;

/// A model bundled with the mesh and grid it is normally solved on.
#[derive(Debug, Clone)]
pub struct Setup {
    pub name: &'static str,
    pub model: ModelSpec,
    pub mesh: ControlMesh,
    pub grid: GridSpec,
}

impl Setup {
    /// Same setup with the time step set to the scheme's CFL bound.
    pub fn with_cfl_step(mut self) -> Result<Self> {
        let bound = ExplicitScheme::new(&self.model, &self.mesh, self.grid.clone())?.cfl_bound();
        self.grid = self.grid.with_dt(bound)?;
        Ok(self)
    }

    /// Halves `dx` and quarters `dt`.
    pub fn refined(mut self) -> Result<Self> {
        self.grid = self.grid.refined()?;
        Ok(self)
    }
}

/// Placeholder step, replaced by the CFL bound in [`Setup::with_cfl_step`].
const PROVISIONAL_DT: f64 = 1e-6;

fn one_dim(name: &'static str, lo: f64, hi: f64, t_end: f64) -> Result<Setup> {
    let model = ModelSpec::new(
        1,
        DriftFamily::BoxDrift,
        DiffusionFamily::scalar(1, 1.0)?,
        ControlBox::cube(1, lo, hi)?,
        2.0,
    )?;
    let mesh = ControlMesh::uniform(model.controls(), &[0.5])?;
    let grid = GridSpec::new(BoxDomain::cube(1, -8.0, 8.0)?, &[0.02], PROVISIONAL_DT, t_end)?;
    Setup { name, model, mesh, grid }.with_cfl_step()
}

/// `dX = σ dW`, `a ≡ 1`, on `[−8, 8]` with `dx = 0.02`.
pub fn heat(t_end: f64) -> Result<Setup> {
    one_dim("heat", 0.0, 0.0, t_end)
}

/// `b(f, x) = f`, `f ∈ [−1, 1]`, `a ≡ 1`, on `[−8, 8]` with `dx = 0.02`.
pub fn box_drift(t_end: f64) -> Result<Setup> {
    one_dim("box-drift", -1.0, 1.0, t_end)
}

/// Two-dimensional model with state-dependent coefficients:
///
/// ```text
/// b(f, x) = (f₁ + ½ tanh(x₂), (½ + ¼ cos x₁) f₂),   f ∈ [−1, 1]²
/// a(x)    = diag(1.25 + ¼ sin x₁, 1 + ¼ cos x₂)
/// ```
///
/// on `[−4, 4]²` with `dx = 0.05`.
pub fn planar(t_end: f64) -> Result<Setup> {
    let matrix = vec![
        Expr::Const(1.0),
        Expr::Const(0.0),
        Expr::Const(0.0),
        Expr::Sum(vec![Expr::Const(0.5), Expr::Cos { axis: 0, scale: 1.0, amp: 0.25 }]),
    ];
    let offset = vec![Expr::Tanh { axis: 1, scale: 1.0, amp: 0.5 }, Expr::Const(0.0)];
    let diffusion = DiffusionFamily::Diagonal {
        g: vec![
            Expr::Sum(vec![Expr::Const(1.25), Expr::Sin { axis: 0, scale: 1.0, amp: 0.25 }]),
            Expr::Sum(vec![Expr::Const(1.0), Expr::Cos { axis: 1, scale: 1.0, amp: 0.25 }]),
        ],
        clamp: true,
    };
    let model = ModelSpec::new(
        2,
        DriftFamily::Affine { matrix, offset, control_dim: 2 },
        diffusion,
        ControlBox::cube(2, -1.0, 1.0)?,
        2.0,
    )?;
    let mesh = ControlMesh::uniform(model.controls(), &[1.0, 1.0])?;
    let grid = GridSpec::new(BoxDomain::cube(2, -4.0, 4.0)?, &[0.05, 0.05], PROVISIONAL_DT, t_end)?;
    Setup { name: "planar", model, mesh, grid }.with_cfl_step()
}

/// The three built-in setups.
pub fn all(t_end: f64) -> Result<[Setup; 3]> {
    Ok([heat(t_end)?, box_drift(t_end)?, planar(t_end)?])
}
