//! Drift and diffusion families, the control mesh, the nonlinearity `G`, and
//! sampled checks of the standing conditions on the coefficients.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::BoxDomain;
use crate::math;
use crate::MAX_DIM;

/// Scalar expression of the state used by the affine drift and diagonal
/// diffusion families.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// `amp · tanh(scale · x[axis])`
    Tanh { axis: usize, scale: f64, amp: f64 },
    /// `amp · sin(scale · x[axis])`
    Sin { axis: usize, scale: f64, amp: f64 },
    /// `amp · cos(scale · x[axis])`
    Cos { axis: usize, scale: f64, amp: f64 },
    /// `amp · x[axis]²`
    Square { axis: usize, amp: f64 },
    Sum(Vec<Expr>),
}

impl Expr {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Tanh { axis, scale, amp } => amp * math::tanh(scale * x[*axis]),
            Expr::Sin { axis, scale, amp } => amp * math::sin(scale * x[*axis]),
            Expr::Cos { axis, scale, amp } => amp * math::cos(scale * x[*axis]),
            Expr::Square { axis, amp } => amp * x[*axis] * x[*axis],
            Expr::Sum(terms) => terms.iter().map(|e| e.eval(x)).sum(),
        }
    }

    fn max_axis(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Tanh { axis, .. }
            | Expr::Sin { axis, .. }
            | Expr::Cos { axis, .. }
            | Expr::Square { axis, .. } => Some(*axis),
            Expr::Sum(terms) => terms.iter().filter_map(Expr::max_axis).max(),
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            Expr::Const(c) => c.is_finite(),
            Expr::Tanh { scale, amp, .. }
            | Expr::Sin { scale, amp, .. }
            | Expr::Cos { scale, amp, .. } => scale.is_finite() && amp.is_finite(),
            Expr::Square { amp, .. } => amp.is_finite(),
            Expr::Sum(terms) => terms.iter().all(Expr::is_finite),
        }
    }
}

/// Product of closed intervals: the compact control set `F ⊂ ℝ^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl ControlBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::InvalidModel(format!(
                "control box bounds have lengths {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l.is_finite() && h.is_finite() && l <= h)) {
            return Err(Error::InvalidModel("control box needs finite lo <= hi".into()));
        }
        Ok(Self { lo, hi })
    }

    /// `[lo, hi]^m`
    pub fn cube(m: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; m], vec![hi; m])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, f: &[f64]) -> bool {
        f.len() == self.dim()
            && f.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| {
                let tol = 1e-12 * (1.0 + l.abs().max(h.abs()));
                *v >= l - tol && *v <= h + tol
            })
    }
}

/// Drift map `(f, x) ↦ b(f, x)`.
#[derive(Debug, Clone)]
pub enum DriftFamily {
    /// `b(f, x) = f`, with `F ⊂ ℝ^d`.
    BoxDrift,
    /// `b(f, x) = A(x) f + c(x)`; `matrix` is `d×m` row-major.
    Affine { matrix: Vec<Expr>, offset: Vec<Expr>, control_dim: usize },
    /// User supplied drift. Convexity of `{b(f,x)}` can only be certified
    /// when the caller asserts the map is affine in `f`.
    Custom {
        eval: fn(&[f64], &[f64], &mut [f64]),
        control_dim: usize,
        affine_in_control: bool,
    },
}

impl DriftFamily {
    /// `b(f, x) = f · tanh(x₁) e₁` with a scalar control.
    pub fn shear(dim: usize) -> Self {
        let mut matrix = vec![Expr::Const(0.0); dim];
        matrix[0] = Expr::Tanh { axis: 0, scale: 1.0, amp: 1.0 };
        DriftFamily::Affine { matrix, offset: vec![Expr::Const(0.0); dim], control_dim: 1 }
    }

    pub fn control_dim(&self, dim: usize) -> usize {
        match self {
            DriftFamily::BoxDrift => dim,
            DriftFamily::Affine { control_dim, .. } | DriftFamily::Custom { control_dim, .. } => {
                *control_dim
            }
        }
    }

    pub fn is_affine_in_control(&self) -> bool {
        match self {
            DriftFamily::BoxDrift | DriftFamily::Affine { .. } => true,
            DriftFamily::Custom { affine_in_control, .. } => *affine_in_control,
        }
    }
}

/// Diffusion map `x ↦ a(x)` together with its factor `σ`, `a = σσ*`.
/// The stored factor is always lower triangular.
#[derive(Debug, Clone, PartialEq)]
pub enum DiffusionFamily {
    Constant { a: Vec<f64>, sigma: Vec<f64> },
    /// `a(x) = diag(g_i(x))`, optionally clamped into `[1/C, C]`.
    Diagonal { g: Vec<Expr>, clamp: bool },
}

impl DiffusionFamily {
    /// Constant SPD matrix (row-major `d×d`); the factor is its Cholesky factor.
    pub fn constant(dim: usize, a: Vec<f64>) -> Result<Self> {
        if a.len() != dim * dim {
            return Err(Error::InvalidModel(format!(
                "diffusion matrix has {} entries, expected {}",
                a.len(),
                dim * dim
            )));
        }
        let m = DMatrix::from_row_slice(dim, dim, &a);
        if (&m - m.transpose()).amax() > 1e-12 * (1.0 + m.amax()) {
            return Err(Error::InvalidModel("diffusion matrix is not symmetric".into()));
        }
        let chol = m
            .cholesky()
            .ok_or_else(|| Error::InvalidModel("diffusion matrix is not positive definite".into()))?;
        let l = chol.l();
        let mut sigma = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..=i {
                sigma[i * dim + j] = l[(i, j)];
            }
        }
        Ok(DiffusionFamily::Constant { a, sigma })
    }

    /// `a ≡ s·I`.
    pub fn scalar(dim: usize, s: f64) -> Result<Self> {
        let mut a = vec![0.0; dim * dim];
        for i in 0..dim {
            a[i * dim + i] = s;
        }
        Self::constant(dim, a)
    }
}

#[derive(Debug, Clone)]
pub struct ModelSpec {
    dim: usize,
    drift: DriftFamily,
    diffusion: DiffusionFamily,
    controls: ControlBox,
    bound_c: f64,
}

impl ModelSpec {
    pub fn new(
        dim: usize,
        drift: DriftFamily,
        diffusion: DiffusionFamily,
        controls: ControlBox,
        bound_c: f64,
    ) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Dimension { got: dim, max: MAX_DIM });
        }
        if !(bound_c.is_finite() && bound_c > 0.0) {
            return Err(Error::InvalidModel(format!("bound C must be positive, got {bound_c}")));
        }
        let m = drift.control_dim(dim);
        if controls.dim() != m {
            return Err(Error::InvalidModel(format!(
                "control box has dimension {}, drift family expects {m}",
                controls.dim()
            )));
        }
        let axis_ok = |e: &Expr| e.is_finite() && e.max_axis().map_or(true, |a| a < dim);
        match &drift {
            DriftFamily::Affine { matrix, offset, .. } => {
                if matrix.len() != dim * m || offset.len() != dim {
                    return Err(Error::InvalidModel("affine drift has wrong shape".into()));
                }
                if !matrix.iter().chain(offset).all(axis_ok) {
                    return Err(Error::InvalidModel(
                        "affine drift expression refers to a missing axis".into(),
                    ));
                }
            }
            DriftFamily::BoxDrift | DriftFamily::Custom { .. } => {}
        }
        match &diffusion {
            DiffusionFamily::Constant { a, .. } => {
                if a.len() != dim * dim {
                    return Err(Error::InvalidModel("diffusion matrix has wrong shape".into()));
                }
            }
            DiffusionFamily::Diagonal { g, .. } => {
                if g.len() != dim || !g.iter().all(axis_ok) {
                    return Err(Error::InvalidModel("diagonal diffusion has wrong shape".into()));
                }
            }
        }
        Ok(Self { dim, drift, diffusion, controls, bound_c })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn control_dim(&self) -> usize {
        self.controls.dim()
    }

    pub fn controls(&self) -> &ControlBox {
        &self.controls
    }

    pub fn drift_family(&self) -> &DriftFamily {
        &self.drift
    }

    pub fn diffusion_family(&self) -> &DiffusionFamily {
        &self.diffusion
    }

    pub fn bound_c(&self) -> f64 {
        self.bound_c
    }

    /// Same model with a different bound constant.
    pub fn with_bound(&self, bound_c: f64) -> Result<Self> {
        Self::new(self.dim, self.drift.clone(), self.diffusion.clone(), self.controls.clone(), bound_c)
    }

    /// Writes `b(f, x)` into `out` without checking `f ∈ F`.
    pub fn drift_into(&self, f: &[f64], x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        match &self.drift {
            DriftFamily::BoxDrift => out[..d].copy_from_slice(&f[..d]),
            DriftFamily::Affine { matrix, offset, control_dim } => {
                for i in 0..d {
                    let mut v = offset[i].eval(x);
                    for k in 0..*control_dim {
                        v += matrix[i * control_dim + k].eval(x) * f[k];
                    }
                    out[i] = v;
                }
            }
            DriftFamily::Custom { eval, .. } => eval(f, x, &mut out[..d]),
        }
    }

    /// `b(f, x)`; fails when `f` lies outside the control box.
    pub fn eval_drift(&self, f: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        if !self.controls.contains(f) {
            return Err(Error::ControlOutOfBox);
        }
        let mut out = vec![0.0; self.dim];
        self.drift_into(f, x, &mut out);
        Ok(out)
    }

    fn diag_entry(&self, g: &Expr, clamp: bool, x: &[f64]) -> f64 {
        let v = g.eval(x);
        if clamp {
            v.clamp(1.0 / self.bound_c, self.bound_c)
        } else {
            v
        }
    }

    /// Writes `a(x)` (row-major `d×d`) into `out`.
    pub fn diffusion_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        match &self.diffusion {
            DiffusionFamily::Constant { a, .. } => out[..d * d].copy_from_slice(a),
            DiffusionFamily::Diagonal { g, clamp } => {
                out[..d * d].iter_mut().for_each(|v| *v = 0.0);
                for i in 0..d {
                    out[i * d + i] = self.diag_entry(&g[i], *clamp, x);
                }
            }
        }
    }

    /// Writes the lower-triangular factor `σ(x)` into `out`.
    pub fn sigma_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        match &self.diffusion {
            DiffusionFamily::Constant { sigma, .. } => out[..d * d].copy_from_slice(sigma),
            DiffusionFamily::Diagonal { g, clamp } => {
                out[..d * d].iter_mut().for_each(|v| *v = 0.0);
                for i in 0..d {
                    out[i * d + i] = math::sqrt(self.diag_entry(&g[i], *clamp, x).max(0.0));
                }
            }
        }
    }

    pub fn diffusion(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim * self.dim];
        self.diffusion_into(x, &mut out);
        out
    }

    pub fn sigma(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim * self.dim];
        self.sigma_into(x, &mut out);
        out
    }
}

/// Finite set of control points standing in for `F`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlMesh {
    dim: usize,
    points: Vec<f64>,
    resolution: Vec<f64>,
}

impl ControlMesh {
    /// Uniform tensor mesh with spacing at most `resolution[k]` on axis `k`.
    /// Every vertex of the box is a mesh point. Points are ordered with axis 0
    /// varying fastest.
    pub fn uniform(controls: &ControlBox, resolution: &[f64]) -> Result<Self> {
        let m = controls.dim();
        if resolution.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: resolution.len() });
        }
        if resolution.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidModel("mesh resolution must be positive".into()));
        }
        let axes: Vec<Vec<f64>> = (0..m)
            .map(|k| {
                let (lo, hi) = (controls.lo()[k], controls.hi()[k]);
                let width = hi - lo;
                if width == 0.0 {
                    return vec![lo];
                }
                let n = (math::ceil(width / resolution[k] - 1e-9) as usize).max(1) + 1;
                (0..n)
                    .map(|i| if i + 1 == n { hi } else { lo + width * (i as f64 / (n - 1) as f64) })
                    .collect()
            })
            .collect();
        let total: usize = axes.iter().map(Vec::len).product();
        if total > 100_000 {
            return Err(Error::InvalidModel(format!("control mesh has {total} points")));
        }
        let mut points = Vec::with_capacity(total * m);
        for idx in 0..total {
            let mut rem = idx;
            for axis in &axes {
                points.push(axis[rem % axis.len()]);
                rem /= axis.len();
            }
        }
        let resolution = axes
            .iter()
            .zip(0..m)
            .map(|(a, k)| if a.len() > 1 { (controls.hi()[k] - controls.lo()[k]) / (a.len() - 1) as f64 } else { 0.0 })
            .collect();
        Ok(Self { dim: m, points, resolution })
    }

    /// Only the vertices of the box.
    pub fn vertices(controls: &ControlBox) -> Result<Self> {
        let res: Vec<f64> = controls
            .lo()
            .iter()
            .zip(controls.hi())
            .map(|(l, h)| if h > l { h - l } else { 1.0 })
            .collect();
        Self::uniform(controls, &res)
    }

    /// Halves the spacing on every axis. The result is a superset of `self`.
    pub fn refined(&self, controls: &ControlBox) -> Result<Self> {
        let res: Vec<f64> = self
            .resolution
            .iter()
            .map(|r| if *r > 0.0 { r / 2.0 } else { 1.0 })
            .collect();
        Self::uniform(controls, &res)
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn control_dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    pub fn resolution(&self) -> &[f64] {
        &self.resolution
    }
}

/// `G(x, p, M) = max_{f ∈ mesh} ⟨b(f, x), p⟩ + ½ tr[a(x) M]` together with
/// the maximising mesh index (lowest index on ties).
pub fn eval_g_argmax(model: &ModelSpec, mesh: &ControlMesh, x: &[f64], p: &[f64], m: &[f64]) -> (f64, usize) {
    let d = model.dim();
    let mut b = [0.0; MAX_DIM];
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for (i, f) in mesh.points().enumerate() {
        model.drift_into(f, x, &mut b);
        let v: f64 = (0..d).map(|k| b[k] * p[k]).sum();
        if v > best {
            best = v;
            arg = i;
        }
    }
    let mut a = [0.0; MAX_DIM * MAX_DIM];
    model.diffusion_into(x, &mut a);
    let mut tr = 0.0;
    for i in 0..d {
        for j in 0..d {
            tr += a[i * d + j] * m[j * d + i];
        }
    }
    (best + 0.5 * tr, arg)
}

/// The nonlinearity `G` evaluated on a gradient `p` and a symmetric
/// Hessian `m` (row-major).
pub fn eval_g(model: &ModelSpec, mesh: &ControlMesh, x: &[f64], p: &[f64], m: &[f64]) -> f64 {
    eval_g_argmax(model, mesh, x, p, m).0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize), serde(rename_all = "lowercase"))]
pub enum Verdict {
    Pass,
    Fail,
    Unknown,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn is_fail(self) -> bool {
        self == Verdict::Fail
    }
}

/// Sampled evidence for the boundedness, ellipticity, convexity and
/// Lipschitz conditions on the coefficients.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ConditionReport {
    pub n_samples: usize,
    pub bound_c: f64,
    pub drift_norm_max: f64,
    pub drift_bound: Verdict,
    pub eigen_min: f64,
    pub eigen_max: f64,
    pub ellipticity: Verdict,
    pub factor_residual: f64,
    pub factorization: Verdict,
    pub convexity: Verdict,
    pub lipschitz_drift: f64,
    pub lipschitz_sigma: f64,
}

impl ConditionReport {
    pub fn any_failed(&self) -> bool {
        [self.drift_bound, self.ellipticity, self.factorization, self.convexity]
            .iter()
            .any(|v| v.is_fail())
    }
}

fn norm(v: &[f64]) -> f64 {
    math::sqrt(v.iter().map(|x| x * x).sum())
}

pub fn check_conditions(
    model: &ModelSpec,
    mesh: &ControlMesh,
    domain: &BoxDomain,
    n_samples: usize,
    seed: u64,
) -> Result<ConditionReport> {
    let d = model.dim();
    if domain.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: domain.dim() });
    }
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = domain.widths().fold(0.0_f64, f64::max);
    let h = 1e-6 * width.max(1.0);

    let mut drift_max = 0.0_f64;
    let (mut eig_min, mut eig_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut factor_residual = 0.0_f64;
    let (mut lip_b, mut lip_s) = (0.0_f64, 0.0_f64);

    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut bx = vec![0.0; d];
    let mut by = vec![0.0; d];
    let mut a = vec![0.0; d * d];
    let mut sx = vec![0.0; d * d];
    let mut sy = vec![0.0; d * d];
    for _ in 0..n_samples {
        for k in 0..d {
            x[k] = rng.gen_range(domain.lo()[k]..=domain.hi()[k]);
        }
        let mut dir = vec![0.0; d];
        for v in dir.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let n = norm(&dir).max(1e-300);
        for k in 0..d {
            y[k] = x[k] + h * dir[k] / n;
        }
        let dist = norm(&x.iter().zip(&y).map(|(p, q)| p - q).collect::<Vec<_>>());

        for f in mesh.points() {
            model.drift_into(f, &x, &mut bx);
            model.drift_into(f, &y, &mut by);
            drift_max = drift_max.max(norm(&bx));
            let diff: Vec<f64> = bx.iter().zip(&by).map(|(p, q)| p - q).collect();
            lip_b = lip_b.max(norm(&diff) / dist);
        }

        model.diffusion_into(&x, &mut a);
        let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, &a)).eigenvalues;
        eig_min = eig_min.min(eig.min());
        eig_max = eig_max.max(eig.max());

        model.sigma_into(&x, &mut sx);
        model.sigma_into(&y, &mut sy);
        for i in 0..d {
            for j in 0..d {
                let ss: f64 = (0..d).map(|k| sx[i * d + k] * sx[j * d + k]).sum();
                factor_residual = factor_residual.max((ss - a[i * d + j]).abs());
            }
        }
        let diff: Vec<f64> = sx.iter().zip(&sy).map(|(p, q)| p - q).collect();
        lip_s = lip_s.max(norm(&diff) / dist);
    }

    let c = model.bound_c();
    let tol = 1e-12 * c;
    Ok(ConditionReport {
        n_samples,
        bound_c: c,
        drift_norm_max: drift_max,
        drift_bound: Verdict::from_bool(drift_max <= c + tol),
        eigen_min: eig_min,
        eigen_max: eig_max,
        ellipticity: Verdict::from_bool(eig_min >= 1.0 / c - tol && eig_max <= c + tol),
        factor_residual,
        factorization: Verdict::from_bool(factor_residual <= 1e-12 * (1.0 + eig_max.abs())),
        convexity: if model.drift_family().is_affine_in_control() {
            Verdict::Pass
        } else {
            Verdict::Unknown
        },
        lipschitz_drift: lip_b,
        lipschitz_sigma: lip_s,
    })
}
