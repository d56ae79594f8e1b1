//! Explicit monotone finite-difference scheme for `∂_t u = G(x, u)`.
//!
//! The drift term is upwinded separately for every control candidate and the
//! maximum is taken afterwards, so each candidate stencil, and therefore the
//! maximum, is nondecreasing in every neighbour value under the time step
//! bound
//!
//! ```text
//! dt ≤ 1 / Σ_i ( max a_ii / dx_i² + max |b_i| / dx_i ).
//! ```
//!
//! Second derivatives use central differences; in two dimensions the mixed
//! derivative uses the seven-point stencil oriented by the sign of `a₁₂`,
//! which is monotone when `a_ii / dx_i² ≥ |a₁₂| / (dx₁ dx₂)` at every node.
//! Neighbours outside the domain are replaced by the boundary node (zero
//! normal derivative).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Lattice, ValueGrid};
use crate::math;
use crate::model::{eval_g, ControlMesh, ModelSpec};
use crate::test_fn::TestFunction;
use crate::MAX_DIM;

#[derive(Debug, Clone)]
pub struct ExplicitScheme {
    model: ModelSpec,
    mesh: ControlMesh,
    grid: GridSpec,
    /// `b(f_c, x_n)` laid out as `[node][control][axis]`.
    drift: Vec<f64>,
    /// `½ a_ii(x_n)` laid out as `[node][axis]`.
    half_diag: Vec<f64>,
    /// `a₁₂(x_n)`; empty in one dimension.
    cross: Vec<f64>,
    cfl_bound: f64,
}

/// Neighbour offsets of a node with constant extension at the boundary.
#[derive(Clone, Copy)]
struct Stencil {
    plus: [usize; 2],
    minus: [usize; 2],
}

impl ExplicitScheme {
    pub fn new(model: &ModelSpec, mesh: &ControlMesh, grid: GridSpec) -> Result<Self> {
        let lattice = grid.lattice();
        let d = lattice.dim();
        if model.dim() != d {
            return Err(Error::DimensionMismatch { expected: model.dim(), got: d });
        }
        if mesh.control_dim() != model.control_dim() {
            return Err(Error::DimensionMismatch { expected: model.control_dim(), got: mesh.control_dim() });
        }
        let n = lattice.len();
        let nc = mesh.len();
        let mut drift = vec![0.0; n * nc * d];
        let mut half_diag = vec![0.0; n * d];
        let mut cross = if d == 2 { vec![0.0; n] } else { Vec::new() };
        let mut b_max = [0.0_f64; 2];
        let mut a_max = [0.0_f64; 2];
        let mut x = [0.0; 2];
        let mut a = [0.0; MAX_DIM * MAX_DIM];
        let dx = lattice.dx();
        for node in 0..n {
            lattice.node_into(node, &mut x);
            for (c, f) in mesh.points().enumerate() {
                let out = &mut drift[(node * nc + c) * d..(node * nc + c + 1) * d];
                model.drift_into(f, &x[..d], out);
                for k in 0..d {
                    b_max[k] = b_max[k].max(out[k].abs());
                }
            }
            model.diffusion_into(&x[..d], &mut a);
            for k in 0..d {
                let akk = a[k * d + k];
                half_diag[node * d + k] = 0.5 * akk;
                a_max[k] = a_max[k].max(akk);
            }
            if d == 2 {
                let a12 = a[1];
                cross[node] = a12;
                let lim = a12.abs() / (dx[0] * dx[1]);
                let tol = 1e-12 * lim;
                if a[0] / (dx[0] * dx[0]) + tol < lim || a[3] / (dx[1] * dx[1]) + tol < lim {
                    return Err(Error::NotDiagonallyDominant { node });
                }
            }
        }
        let rate: f64 = (0..d).map(|k| a_max[k] / (dx[k] * dx[k]) + b_max[k] / dx[k]).sum();
        let cfl_bound = 1.0 / rate;
        if grid.dt() > cfl_bound * (1.0 + 1e-12) {
            return Err(Error::Cfl { dt: grid.dt(), bound: cfl_bound });
        }
        Ok(Self { model: model.clone(), mesh: mesh.clone(), grid, drift, half_diag, cross, cfl_bound })
    }

    /// Largest time step for which the scheme is monotone.
    pub fn cfl_bound(&self) -> f64 {
        self.cfl_bound
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn lattice(&self) -> &Lattice {
        self.grid.lattice()
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn mesh(&self) -> &ControlMesh {
        &self.mesh
    }

    #[inline]
    fn stencil(&self, node: usize) -> Stencil {
        let l = self.lattice();
        let counts = l.counts();
        let idx = l.multi_index(node);
        let mut plus = [node; 2];
        let mut minus = [node; 2];
        let mut stride = 1;
        for k in 0..l.dim() {
            if idx[k] + 1 < counts[k] {
                plus[k] = node + stride;
            }
            if idx[k] > 0 {
                minus[k] = node - stride;
            }
            stride *= counts[k];
        }
        Stencil { plus, minus }
    }

    /// Discrete generator `G_h(x_node, u)` and the maximising control index.
    pub fn generator(&self, u: &[f64], node: usize) -> (f64, usize) {
        let d = self.lattice().dim();
        let dx = self.lattice().dx();
        let s = self.stencil(node);
        let c = u[node];

        let mut fwd = [0.0; 2];
        let mut bwd = [0.0; 2];
        for k in 0..d {
            fwd[k] = (u[s.plus[k]] - c) / dx[k];
            bwd[k] = (c - u[s.minus[k]]) / dx[k];
        }
        let nc = self.mesh.len();
        let base = node * nc * d;
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for ctrl in 0..nc {
            let b = &self.drift[base + ctrl * d..base + (ctrl + 1) * d];
            let mut v = 0.0;
            for k in 0..d {
                v += if b[k] >= 0.0 { b[k] * fwd[k] } else { b[k] * bwd[k] };
            }
            if v > best {
                best = v;
                arg = ctrl;
            }
        }

        let mut diff = 0.0;
        for k in 0..d {
            diff += self.half_diag[node * d + k] * (fwd[k] - bwd[k]) / dx[k];
        }
        if d == 2 {
            let a12 = self.cross[node];
            if a12 != 0.0 {
                let n0 = self.lattice().counts()[0];
                let idx = self.lattice().multi_index(node);
                let counts = self.lattice().counts();
                let at = |di: isize, dj: isize| -> f64 {
                    let i = (idx[0] as isize + di).clamp(0, counts[0] as isize - 1) as usize;
                    let j = (idx[1] as isize + dj).clamp(0, counts[1] as isize - 1) as usize;
                    u[j * n0 + i]
                };
                let axial = u[s.plus[0]] + u[s.minus[0]] + u[s.plus[1]] + u[s.minus[1]];
                let mixed = if a12 > 0.0 {
                    (2.0 * c + at(1, 1) + at(-1, -1) - axial) / (2.0 * dx[0] * dx[1])
                } else {
                    -(2.0 * c + at(1, -1) + at(-1, 1) - axial) / (2.0 * dx[0] * dx[1])
                };
                diff += a12 * mixed;
            }
        }
        (best + diff, arg)
    }

    /// One explicit Euler step `u + dt · G_h(·, u)`.
    pub fn step(&self, u: &ValueGrid, dt: f64) -> Result<ValueGrid> {
        if u.lattice() != self.lattice() {
            return Err(Error::InvalidGrid("value grid does not match the scheme lattice".into()));
        }
        if !(dt > 0.0) || dt > self.cfl_bound * (1.0 + 1e-12) {
            return Err(Error::Cfl { dt, bound: self.cfl_bound });
        }
        Ok(self.step_unchecked(u, dt))
    }

    fn step_unchecked(&self, u: &ValueGrid, dt: f64) -> ValueGrid {
        let vals = u.values();
        let next = math::map_indexed(vals.len(), |n| vals[n] + dt * self.generator(vals, n).0);
        ValueGrid::from_parts(self.lattice().clone(), next, u.time() + dt)
    }

    /// Approximates `T_t(ψ)` on the lattice.
    pub fn solve(&self, psi: &TestFunction, t: f64) -> Result<ValueGrid> {
        psi.validate(self.lattice().dim())?;
        self.solve_from(&ValueGrid::sample(self.lattice(), psi), t)
    }

    /// Runs the scheme for a duration `t` from the datum `u0`. The time step
    /// is the grid step reduced so that it divides `t` exactly.
    pub fn solve_from(&self, u0: &ValueGrid, t: f64) -> Result<ValueGrid> {
        if u0.lattice() != self.lattice() {
            return Err(Error::InvalidGrid("initial datum does not match the scheme lattice".into()));
        }
        if !(t >= 0.0) {
            return Err(Error::InvalidArgument(alloc::format!("negative horizon {t}")));
        }
        if t > self.grid.t_end() * (1.0 + 1e-12) {
            return Err(Error::HorizonBeyondEnd { t, t_end: self.grid.t_end() });
        }
        if t == 0.0 {
            return Ok(u0.clone());
        }
        let steps = (math::ceil(t / self.grid.dt() - 1e-9) as usize).max(1);
        let dt = t / steps as f64;
        let mut u = u0.clone();
        for _ in 0..steps {
            u = self.step_unchecked(&u, dt);
        }
        let (lo, hi) = (u0.min(), u0.max());
        let tol = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        if u.min() < lo - tol || u.max() > hi + tol {
            return Err(Error::MaximumPrinciple { value: u.sup_abs(), bound: u0.sup_abs() });
        }
        Ok(u.with_time(u0.time() + t))
    }

    /// Slices of the solution at the given increasing times (measured from
    /// the datum), each obtained by continuing from the previous one.
    pub fn solve_slices(&self, u0: &ValueGrid, times: &[f64]) -> Result<Vec<ValueGrid>> {
        let mut out = Vec::with_capacity(times.len());
        let mut cur = u0.clone();
        let mut elapsed = 0.0;
        for &t in times {
            if t < elapsed {
                return Err(Error::InvalidArgument("slice times must be increasing".into()));
            }
            cur = self.solve_from(&cur, t - elapsed)?.with_time(u0.time() + t);
            elapsed = t;
            out.push(cur.clone());
        }
        Ok(out)
    }
}

/// One explicit step on the lattice of `u` with time step `dt`.
pub fn step_explicit(model: &ModelSpec, mesh: &ControlMesh, u: &ValueGrid, dt: f64) -> Result<ValueGrid> {
    let grid = GridSpec::from_lattice(u.lattice().clone(), dt, dt)?;
    ExplicitScheme::new(model, mesh, grid)?.step(u, dt)
}

/// Consistency residual `∂_t v − G_h(x, v)` at the interior time slices.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    /// Signed residual fields, one per interior slice.
    pub fields: Vec<ValueGrid>,
    /// Largest `|residual|` over the middle half of the domain.
    pub interior_sup: f64,
    /// Mean `|residual|` over the middle half of the domain.
    pub interior_mean: f64,
}

pub fn residual(scheme: &ExplicitScheme, slices: &[ValueGrid]) -> Result<ResidualReport> {
    if slices.len() < 3 {
        return Err(Error::TooFewSlices { needed: 3, got: slices.len() });
    }
    let lattice = scheme.lattice();
    if slices.iter().any(|s| s.lattice() != lattice) {
        return Err(Error::InvalidGrid("time slices must share the scheme lattice".into()));
    }
    let interior = lattice.nodes_in(&lattice.domain().middle_half());
    let mut fields = Vec::with_capacity(slices.len() - 2);
    let mut sup = 0.0_f64;
    let mut sum = math::CompensatedSum::default();
    let mut count = 0usize;
    for k in 1..slices.len() - 1 {
        let (prev, cur, next) = (&slices[k - 1], &slices[k], &slices[k + 1]);
        let span = next.time() - prev.time();
        if !(span > 0.0) {
            return Err(Error::InvalidArgument("slice times must be strictly increasing".into()));
        }
        let v = cur.values();
        let field: Vec<f64> = (0..v.len())
            .map(|n| (next.values()[n] - prev.values()[n]) / span - scheme.generator(v, n).0)
            .collect();
        for &n in &interior {
            sup = sup.max(field[n].abs());
            sum.add(field[n].abs());
            count += 1;
        }
        fields.push(ValueGrid::from_parts(lattice.clone(), field, cur.time()));
    }
    Ok(ResidualReport { fields, interior_sup: sup, interior_mean: sum.value() / count.max(1) as f64 })
}

/// Smooth function of `(t, x)` with analytic derivatives, used to probe the
/// viscosity inequalities.
pub trait SmoothSurface {
    fn value(&self, t: f64, x: &[f64]) -> f64;
    fn time_derivative(&self, t: f64, x: &[f64]) -> f64;
    fn gradient(&self, t: f64, x: &[f64], out: &mut [f64]);
    /// Row-major `d×d` Hessian in `x`.
    fn hessian(&self, t: f64, x: &[f64], out: &mut [f64]);
}

/// `offset + spatial·‖x − center‖² + temporal·(t − t0)²`
#[derive(Debug, Clone, PartialEq)]
pub struct Paraboloid {
    pub center: Vec<f64>,
    pub t0: f64,
    pub spatial: f64,
    pub temporal: f64,
    pub offset: f64,
}

impl SmoothSurface for Paraboloid {
    fn value(&self, t: f64, x: &[f64]) -> f64 {
        let r2: f64 = self.center.iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum();
        self.offset + self.spatial * r2 + self.temporal * (t - self.t0) * (t - self.t0)
    }

    fn time_derivative(&self, t: f64, _x: &[f64]) -> f64 {
        2.0 * self.temporal * (t - self.t0)
    }

    fn gradient(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate().take(self.center.len()) {
            *o = 2.0 * self.spatial * (x[k] - self.center[k]);
        }
    }

    fn hessian(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        let d = self.center.len();
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = if i == j { 2.0 * self.spatial } else { 0.0 };
            }
        }
    }
}

/// `offset + rate·t + height·exp(−‖x − center‖² / (2 width²))`
#[derive(Debug, Clone, PartialEq)]
pub struct BumpSurface {
    pub center: Vec<f64>,
    pub width: f64,
    pub height: f64,
    pub offset: f64,
    pub rate: f64,
}

impl BumpSurface {
    fn gauss(&self, x: &[f64]) -> f64 {
        let r2: f64 = self.center.iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum();
        math::exp(-r2 / (2.0 * self.width * self.width))
    }
}

impl SmoothSurface for BumpSurface {
    fn value(&self, t: f64, x: &[f64]) -> f64 {
        self.offset + self.rate * t + self.height * self.gauss(x)
    }

    fn time_derivative(&self, _t: f64, _x: &[f64]) -> f64 {
        self.rate
    }

    fn gradient(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        let s2 = self.width * self.width;
        let g = self.height * self.gauss(x);
        for (k, o) in out.iter_mut().enumerate().take(self.center.len()) {
            *o = -g * (x[k] - self.center[k]) / s2;
        }
    }

    fn hessian(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        let d = self.center.len();
        let s2 = self.width * self.width;
        let g = self.height * self.gauss(x);
        for i in 0..d {
            for j in 0..d {
                let yi = x[i] - self.center[i];
                let yj = x[j] - self.center[j];
                let delta = if i == j { 1.0 } else { 0.0 };
                out[i * d + j] = g * (yi * yj / (s2 * s2) - delta / s2);
            }
        }
    }
}

/// Which viscosity inequality is probed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `φ` touches from above; requires `∂_t φ − G ≤ 0`.
    Sub,
    /// `φ` touches from below; requires `∂_t φ − G ≥ 0`.
    Super,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Touching {
    Verdict { side: Side, value: f64, pass: bool },
    /// The precondition failed; `gap` is the largest ordering violation or
    /// the mismatch at the contact point.
    NotTouching { gap: f64 },
}

/// Ordering slack for `u ≤ φ` (or `u ≥ φ`) on the nodes.
pub const TOUCH_ORDER_TOL: f64 = 1e-9;
/// Admissible mismatch between `φ(t₀, x₀)` and the interpolated `u(t₀, x₀)`.
pub const TOUCH_CONTACT_TOL: f64 = 1e-8;

/// Checks the viscosity inequality for a test surface touching the sampled
/// solution `slices` at `(t0, x0)`; `t0` must be one of the slice times.
#[allow(clippy::too_many_arguments)]
pub fn check_touching(
    model: &ModelSpec,
    mesh: &ControlMesh,
    slices: &[ValueGrid],
    phi: &dyn SmoothSurface,
    t0: f64,
    x0: &[f64],
    side: Side,
    tol: f64,
) -> Result<Touching> {
    let Some(first) = slices.first() else {
        return Err(Error::TooFewSlices { needed: 1, got: 0 });
    };
    let lattice = first.lattice();
    let d = lattice.dim();
    if x0.len() != d || model.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x0.len() });
    }
    let contact = slices
        .iter()
        .find(|s| (s.time() - t0).abs() <= 1e-12 * (1.0 + t0.abs()))
        .ok_or_else(|| Error::InvalidArgument(alloc::format!("no slice at t = {t0}")))?;

    let sign = match side {
        Side::Sub => 1.0,
        Side::Super => -1.0,
    };
    let mut worst = 0.0_f64;
    let mut x = [0.0; 2];
    for s in slices {
        for (n, u) in s.values().iter().enumerate() {
            lattice.node_into(n, &mut x);
            // Sub: u ≤ φ, Super: u ≥ φ.
            let excess = sign * (u - phi.value(s.time(), &x[..d]));
            worst = worst.max(excess);
        }
    }
    let mismatch = (phi.value(t0, x0) - contact.interpolate(x0)).abs();
    if worst > TOUCH_ORDER_TOL {
        return Ok(Touching::NotTouching { gap: worst });
    }
    if mismatch > TOUCH_CONTACT_TOL {
        return Ok(Touching::NotTouching { gap: mismatch });
    }

    let mut p = [0.0; MAX_DIM];
    let mut m = [0.0; MAX_DIM * MAX_DIM];
    phi.gradient(t0, x0, &mut p[..d]);
    phi.hessian(t0, x0, &mut m[..d * d]);
    let value = phi.time_derivative(t0, x0) - eval_g(model, mesh, x0, &p[..d], &m[..d * d]);
    let pass = match side {
        Side::Sub => value <= tol,
        Side::Super => value >= -tol,
    };
    Ok(Touching::Verdict { side, value, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoxDomain;
    use crate::model::{ControlBox, DiffusionFamily, DriftFamily};

    fn model_1d(lo: f64, hi: f64) -> (ModelSpec, ControlMesh) {
        let m = ModelSpec::new(
            1,
            DriftFamily::BoxDrift,
            DiffusionFamily::scalar(1, 1.0).unwrap(),
            ControlBox::cube(1, lo, hi).unwrap(),
            2.0,
        )
        .unwrap();
        let mesh = ControlMesh::uniform(m.controls(), &[0.5]).unwrap();
        (m, mesh)
    }

    fn cfl_grid(model: &ModelSpec, mesh: &ControlMesh, dom: BoxDomain, dx: f64, t_end: f64) -> ExplicitScheme {
        let probe = GridSpec::new(dom, &[dx], 1e-12, t_end).unwrap();
        let bound = ExplicitScheme::new(model, mesh, probe.clone()).unwrap().cfl_bound();
        ExplicitScheme::new(model, mesh, probe.with_dt(bound).unwrap()).unwrap()
    }

    #[test]
    fn constants_are_fixed_points() {
        let (m, mesh) = model_1d(-1.0, 1.0);
        let s = cfl_grid(&m, &mesh, BoxDomain::cube(1, -2.0, 2.0).unwrap(), 0.1, 1.0);
        let u = s.solve(&TestFunction::Constant(3.0), 0.7).unwrap();
        assert!(u.values().iter().all(|v| *v == 3.0));
    }

    #[test]
    fn cfl_violation_is_rejected_at_construction() {
        let (m, mesh) = model_1d(-1.0, 1.0);
        let g = GridSpec::new(BoxDomain::cube(1, -2.0, 2.0).unwrap(), &[0.1], 0.01, 1.0).unwrap();
        match ExplicitScheme::new(&m, &mesh, g) {
            Err(Error::Cfl { dt, bound }) => {
                assert_eq!(dt, 0.01);
                // 1 / (1/0.01 + 1/0.1)
                assert!((bound - 1.0 / 110.0).abs() < 1e-15);
            }
            other => panic!("expected CFL error, got {other:?}"),
        }
    }

    #[test]
    fn non_dominant_cross_diffusion_is_rejected() {
        let m = ModelSpec::new(
            2,
            DriftFamily::BoxDrift,
            DiffusionFamily::constant(2, vec![1.0, 0.9, 0.9, 1.0]).unwrap(),
            ControlBox::cube(2, -0.1, 0.1).unwrap(),
            20.0,
        )
        .unwrap();
        let mesh = ControlMesh::vertices(m.controls()).unwrap();
        let g = GridSpec::new(BoxDomain::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap(), &[0.1, 0.2], 1e-4, 1.0)
            .unwrap();
        assert!(matches!(ExplicitScheme::new(&m, &mesh, g), Err(Error::NotDiagonallyDominant { .. })));
    }

    #[test]
    fn one_step_preserves_monotone_data() {
        let (m, mesh) = model_1d(-1.0, 1.0);
        let s = cfl_grid(&m, &mesh, BoxDomain::cube(1, -2.0, 2.0).unwrap(), 0.05, 1.0);
        let u0 = ValueGrid::sample(s.lattice(), &TestFunction::halfspace(1)).map(|v| -v);
        let u1 = s.step(&u0, s.cfl_bound()).unwrap();
        // exact ties may differ by an ulp
        assert!(u1.values().windows(2).all(|w| w[0] <= w[1] + 1e-14));
    }

    /// Hand-written explicit heat step with reflecting ends.
    fn heat_step(u: &[f64], dt: f64, dx: f64) -> Vec<f64> {
        let n = u.len();
        (0..n)
            .map(|i| {
                let l = u[i.saturating_sub(1)];
                let r = u[(i + 1).min(n - 1)];
                u[i] + 0.5 * dt * (r - 2.0 * u[i] + l) / (dx * dx)
            })
            .collect()
    }

    #[test]
    fn heat_step_matches_hand_stencil() {
        let (m, mesh) = model_1d(0.0, 0.0);
        let s = cfl_grid(&m, &mesh, BoxDomain::cube(1, -4.0, 4.0).unwrap(), 0.05, 1.0);
        let u0 = ValueGrid::sample(s.lattice(), &TestFunction::bump(1));
        let dt = s.cfl_bound();
        let got = s.step(&u0, dt).unwrap();
        let want = heat_step(u0.values(), dt, 0.05);
        for (a, b) in got.values().iter().zip(&want) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn translation_and_monotonicity_of_the_solve() {
        let (m, mesh) = model_1d(-1.0, 1.0);
        let s = cfl_grid(&m, &mesh, BoxDomain::cube(1, -3.0, 3.0).unwrap(), 0.05, 1.0);
        let psi = ValueGrid::sample(s.lattice(), &TestFunction::bump(1));
        let phi = ValueGrid::sample(s.lattice(), &TestFunction::tanh(1));
        let big = psi.zip_with(&phi, f64::max);
        let t_psi = s.solve_from(&psi, 0.3).unwrap();
        let t_big = s.solve_from(&big, 0.3).unwrap();
        assert!(t_psi.values().iter().zip(t_big.values()).all(|(a, b)| *a <= *b + 1e-12));
        let shifted = s.solve_from(&psi.map(|v| v + 0.75), 0.3).unwrap();
        for (a, b) in shifted.values().iter().zip(t_psi.values()) {
            assert!((a - b - 0.75).abs() < 1e-10);
        }
    }

    #[test]
    fn residual_needs_three_slices() {
        let (m, mesh) = model_1d(-1.0, 1.0);
        let s = cfl_grid(&m, &mesh, BoxDomain::cube(1, -1.0, 1.0).unwrap(), 0.1, 1.0);
        let u = ValueGrid::constant(s.lattice(), 1.0);
        assert_eq!(residual(&s, &[u.clone(), u]).unwrap_err(), Error::TooFewSlices { needed: 3, got: 2 });
    }

    #[test]
    fn residual_of_constant_datum_is_zero() {
        let (m, mesh) = model_1d(-1.0, 1.0);
        let s = cfl_grid(&m, &mesh, BoxDomain::cube(1, -2.0, 2.0).unwrap(), 0.05, 1.0);
        let u0 = ValueGrid::constant(s.lattice(), -2.0);
        let slices = s.solve_slices(&u0, &[0.1, 0.2, 0.3]).unwrap();
        let r = residual(&s, &slices).unwrap();
        assert_eq!(r.interior_sup, 0.0);
        assert_eq!(r.fields.len(), 1);
    }

    #[test]
    fn paraboloid_touching_zero_solution_is_subsolution() {
        let (m, mesh) = model_1d(-1.0, 1.0);
        let s = cfl_grid(&m, &mesh, BoxDomain::cube(1, -2.0, 2.0).unwrap(), 0.05, 1.0);
        let u0 = ValueGrid::constant(s.lattice(), 0.0);
        let slices = s.solve_slices(&u0, &[0.1, 0.2, 0.3]).unwrap();
        let phi = Paraboloid { center: vec![0.5], t0: 0.2, spatial: 1.0, temporal: 1.0, offset: 0.0 };
        let v = check_touching(&m, &mesh, &slices, &phi, 0.2, &[0.5], Side::Sub, 1e-9).unwrap();
        // ∂_t φ − G = 0 − ½ tr[a · 2I] = −1
        assert_eq!(v, Touching::Verdict { side: Side::Sub, value: -1.0, pass: true });
    }

    #[test]
    fn strictly_separated_surface_is_not_touching() {
        let (m, mesh) = model_1d(0.0, 0.0);
        let s = cfl_grid(&m, &mesh, BoxDomain::cube(1, -4.0, 4.0).unwrap(), 0.1, 1.0);
        let slices = s
            .solve_slices(&ValueGrid::sample(s.lattice(), &TestFunction::bump(1)), &[0.1, 0.2, 0.3])
            .unwrap();
        let phi = BumpSurface { center: vec![0.0], width: 0.5, height: 0.0, offset: 2.0, rate: 0.0 };
        let v = check_touching(&m, &mesh, &slices, &phi, 0.2, &[0.0], Side::Sub, 1e-9).unwrap();
        assert!(matches!(v, Touching::NotTouching { .. }));
    }

    #[test]
    fn bump_surface_derivatives_match_finite_differences() {
        let phi = BumpSurface { center: vec![0.3, -0.2], width: 0.7, height: 1.3, offset: 0.1, rate: 0.4 };
        let x = [0.1, 0.25];
        let h = 1e-5;
        let mut g = [0.0; 2];
        let mut hess = [0.0; 4];
        phi.gradient(0.0, &x, &mut g);
        phi.hessian(0.0, &x, &mut hess);
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let fd = (phi.value(0.0, &xp) - phi.value(0.0, &xm)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-8);
            let mut gp = [0.0; 2];
            let mut gm = [0.0; 2];
            phi.gradient(0.0, &xp, &mut gp);
            phi.gradient(0.0, &xm, &mut gm);
            for j in 0..2 {
                assert!(((gp[j] - gm[j]) / (2.0 * h) - hess[j * 2 + k]).abs() < 1e-7);
            }
        }
    }
}
