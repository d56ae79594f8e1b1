//! One facade over both solvers and the semigroup property suites.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dp::{self, DpSolver, QuadratureRule};
use crate::error::{Error, Result};
use crate::grid::{BoxDomain, GridSpec, Lattice, ValueGrid};
use crate::math;
use crate::model::{ControlMesh, DiffusionFamily, DriftFamily, ModelSpec};
use crate::pde::ExplicitScheme;
use crate::test_fn::TestFunction;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Pde,
    /// Backups of length close to `step` with an `order`-point rule per
    /// axis; without a step, [`dp::default_step`] of the lattice is used.
    Dp { step: Option<f64>, order: usize },
}

impl Method {
    pub fn dp() -> Self {
        Method::Dp { step: None, order: dp::DEFAULT_ORDER }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Method::Pde => "pde",
            Method::Dp { .. } => "dp",
        }
    }
}

#[derive(Debug, Clone)]
enum Engine {
    Pde(ExplicitScheme),
    Dp { solver: DpSolver, step: f64 },
}

/// `T_t` on a fixed lattice, computed by one of the two solvers.
#[derive(Debug, Clone)]
pub struct Semigroup {
    engine: Engine,
    method: Method,
}

impl Semigroup {
    pub fn new(model: &ModelSpec, mesh: &ControlMesh, grid: &GridSpec, method: Method) -> Result<Self> {
        let engine = match method {
            Method::Pde => Engine::Pde(ExplicitScheme::new(model, mesh, grid.clone())?),
            Method::Dp { step, order } => {
                let step = step.unwrap_or_else(|| dp::default_step(grid.lattice()));
                if !(step > 0.0 && step.is_finite()) {
                    return Err(Error::InvalidArgument(alloc::format!("invalid backup step {step}")));
                }
                let rule = QuadratureRule::gauss_hermite(model.dim(), order)?;
                Engine::Dp { solver: DpSolver::new(model, mesh, grid.lattice(), rule)?, step }
            }
        };
        Ok(Self { engine, method })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// Backup step in use, for the dynamic-programming method.
    pub fn dp_step(&self) -> Option<f64> {
        match &self.engine {
            Engine::Pde(_) => None,
            Engine::Dp { step, .. } => Some(*step),
        }
    }

    pub fn lattice(&self) -> &Lattice {
        match &self.engine {
            Engine::Pde(s) => s.lattice(),
            Engine::Dp { solver, .. } => solver.lattice(),
        }
    }

    pub fn model(&self) -> &ModelSpec {
        match &self.engine {
            Engine::Pde(s) => s.model(),
            Engine::Dp { solver, .. } => solver.model(),
        }
    }

    pub fn mesh(&self) -> &ControlMesh {
        match &self.engine {
            Engine::Pde(s) => s.mesh(),
            Engine::Dp { solver, .. } => solver.mesh(),
        }
    }

    /// `T_t(ψ)` on the lattice; `T_0` is sampling.
    pub fn apply(&self, psi: &TestFunction, t: f64) -> Result<ValueGrid> {
        psi.validate(self.lattice().dim())?;
        self.apply_grid(&ValueGrid::sample(self.lattice(), psi), t)
    }

    /// `T_t` applied to the multilinear interpolant of `v0`.
    pub fn apply_grid(&self, v0: &ValueGrid, t: f64) -> Result<ValueGrid> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(alloc::format!("invalid horizon {t}")));
        }
        if t == 0.0 {
            if v0.lattice() != self.lattice() {
                return Err(Error::InvalidGrid("datum does not match the lattice".into()));
            }
            return Ok(v0.clone());
        }
        match &self.engine {
            Engine::Pde(s) => s.solve_from(v0, t),
            Engine::Dp { solver, step } => solver.solve_from(v0, t, dp::steps_for(t, *step)),
        }
    }

    /// `T_t(ψ)` at increasing times, each slice continued from the previous.
    pub fn apply_slices(&self, psi: &TestFunction, times: &[f64]) -> Result<Vec<ValueGrid>> {
        psi.validate(self.lattice().dim())?;
        let mut cur = ValueGrid::sample(self.lattice(), psi);
        let mut elapsed = 0.0;
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            if !(t >= elapsed) {
                return Err(Error::InvalidArgument("slice times must be increasing".into()));
            }
            cur = self.apply_grid(&cur, t - elapsed)?.with_time(t);
            elapsed = t;
            out.push(cur.clone());
        }
        Ok(out)
    }

    /// `‖T_s(T_t ψ) − T_{s+t} ψ‖_∞` on the middle half of the domain.
    pub fn semigroup_gap(&self, psi: &TestFunction, s: f64, t: f64) -> Result<f64> {
        if !(s >= 0.0 && t >= 0.0) {
            return Err(Error::InvalidArgument("s and t must be non-negative".into()));
        }
        let inner = self.apply(psi, t)?;
        let composed = self.apply_grid(&inner, s)?;
        let whole = self.apply(psi, s + t)?;
        Ok(whole.max_abs_diff_on(&composed, &self.lattice().domain().middle_half()))
    }

    /// Checks the semigroup axioms on `n_pairs` seeded random pairs drawn
    /// from `pool`, at every horizon in `times`.
    pub fn axiom_suite(&self, pool: &[TestFunction], times: &[f64], n_pairs: usize, seed: u64) -> Result<AxiomReport> {
        if pool.is_empty() || times.is_empty() {
            return Err(Error::InvalidArgument("function and time pools must be nonempty".into()));
        }
        let lattice = self.lattice();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut monotone = AxiomCheck::new("monotonicity", AXIOM_TOL_MONOTONE);
        let mut constants = AxiomCheck::new("constants", 0.0);
        let mut subadditive = AxiomCheck::new("subadditivity", AXIOM_TOL);
        let mut translation = AxiomCheck::new("translation", AXIOM_TOL);
        let mut homogeneity = AxiomCheck::new("positive-homogeneity", AXIOM_TOL);

        for &t in times {
            for c in [-1.5, 0.0, 3.0] {
                let v = self.apply_grid(&ValueGrid::constant(lattice, c), t)?;
                constants.record(v.values().iter().map(|x| (x - c).abs()).fold(0.0, f64::max));
            }
        }
        for _ in 0..n_pairs {
            let psi = ValueGrid::sample(lattice, &pool[rng.gen_range(0..pool.len())]);
            let phi = ValueGrid::sample(lattice, &pool[rng.gen_range(0..pool.len())]);
            let shift = rng.gen_range(-1.0..=1.0);
            let scale = rng.gen_range(0.0..=2.0);
            let t = times[rng.gen_range(0..times.len())];

            let tp = self.apply_grid(&psi, t)?;
            let tf = self.apply_grid(&phi, t)?;
            let upper = self.apply_grid(&psi.zip_with(&phi, f64::max), t)?;
            let sum = self.apply_grid(&psi.zip_with(&phi, |a, b| a + b), t)?;
            let shifted = self.apply_grid(&psi.map(|a| a + shift), t)?;
            let scaled = self.apply_grid(&psi.map(|a| a * scale), t)?;

            let n = lattice.len();
            let (mut mono, mut sub, mut tr, mut hom) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
            for i in 0..n {
                let (a, b) = (tp.values()[i], tf.values()[i]);
                mono = mono.max(a - upper.values()[i]).max(b - upper.values()[i]);
                sub = sub.max(sum.values()[i] - a - b);
                tr = tr.max((shifted.values()[i] - a - shift).abs());
                hom = hom.max((scaled.values()[i] - scale * a).abs());
            }
            monotone.record(mono);
            subadditive.record(sub);
            translation.record(tr);
            homogeneity.record(hom);
        }
        Ok(AxiomReport {
            method: self.method.tag(),
            n_pairs,
            checks: [monotone, constants, subadditive, translation, homogeneity].into(),
        })
    }

    /// Empirical modulus of continuity of `T_t ψ` on the middle half.
    pub fn feller_modulus(&self, psi: &TestFunction, t: f64, deltas: &[f64]) -> Result<ModulusReport> {
        if t == 0.0 {
            return Err(Error::ZeroHorizon);
        }
        if deltas.is_empty() || deltas.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::InvalidArgument("gaps must be positive".into()));
        }
        let v = self.apply(psi, t)?;
        let data = ValueGrid::sample(self.lattice(), psi);
        let region = self.lattice().domain().middle_half();
        let omega: Vec<f64> = deltas.iter().map(|d| empirical_modulus(&v, &region, *d)).collect();
        let data_omega = deltas.iter().map(|d| empirical_modulus(&data, &region, *d)).collect();
        let reference = constant_drift_oracle_available(self.model(), psi).then(|| {
            let exact = ValueGrid::from_fn(self.lattice(), t, |x| {
                constant_drift_oracle(self.model(), psi, x, t).unwrap_or(f64::NAN)
            });
            deltas.iter().map(|d| empirical_modulus(&exact, &region, *d)).collect()
        });

        let mut order: Vec<usize> = (0..deltas.len()).collect();
        order.sort_by(|a, b| deltas[*a].total_cmp(&deltas[*b]));
        let monotone = order.windows(2).all(|w| omega[w[0]] <= omega[w[1]] + 1e-15);
        let omega_zero = match order.as_slice() {
            [i] => omega[*i],
            [i, j, ..] => {
                let slope = (omega[*j] - omega[*i]) / (deltas[*j] - deltas[*i]);
                (omega[*i] - slope * deltas[*i]).max(0.0)
            }
            [] => unreachable!(),
        };
        Ok(ModulusReport {
            t,
            psi: alloc::format!("{psi}"),
            method: self.method.tag(),
            deltas: deltas.to_vec(),
            omega,
            data_omega,
            monotone,
            omega_zero,
            reference,
        })
    }

    /// Nodewise `T_t ψ ≤ T_t φ` for data with `ψ ≤ φ` on the nodes.
    pub fn comparison_test(&self, psi: &TestFunction, phi: &TestFunction, t: f64) -> Result<Comparison> {
        let lattice = self.lattice();
        let (a, b) = (ValueGrid::sample(lattice, psi), ValueGrid::sample(lattice, phi));
        if a.values().iter().zip(b.values()).any(|(x, y)| x > y) {
            return Err(Error::InvalidArgument("comparison needs ψ ≤ φ at every node".into()));
        }
        self.compare_grids(&a, &b, t)
    }

    /// Like [`Semigroup::comparison_test`] for data given on the lattice.
    pub fn compare_grids(&self, lower: &ValueGrid, upper: &ValueGrid, t: f64) -> Result<Comparison> {
        let (tl, tu) = (self.apply_grid(lower, t)?, self.apply_grid(upper, t)?);
        let gaps = tu.values().iter().zip(tl.values()).map(|(u, l)| u - l);
        let (min_gap, max_gap) = gaps.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), g| (lo.min(g), hi.max(g)));
        Ok(Comparison { min_gap, max_gap, pass: min_gap >= -COMPARISON_TOL })
    }
}

/// Convenience wrapper around [`Semigroup`].
pub fn apply_t(
    model: &ModelSpec,
    mesh: &ControlMesh,
    grid: &GridSpec,
    psi: &TestFunction,
    t: f64,
    method: Method,
) -> Result<ValueGrid> {
    Semigroup::new(model, mesh, grid, method)?.apply(psi, t)
}

pub const AXIOM_TOL_MONOTONE: f64 = 1e-10;
pub const AXIOM_TOL: f64 = 1e-8;
pub const COMPARISON_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct AxiomCheck {
    pub name: &'static str,
    /// Largest violation seen; `0` when the axiom held exactly.
    pub worst: f64,
    pub tolerance: f64,
    pub cases: usize,
    pub pass: bool,
}

impl AxiomCheck {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self { name, worst: 0.0, tolerance, cases: 0, pass: true }
    }

    fn record(&mut self, violation: f64) {
        self.worst = self.worst.max(violation);
        self.cases += 1;
        self.pass = self.worst <= self.tolerance;
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct AxiomReport {
    pub method: &'static str,
    pub n_pairs: usize,
    pub checks: Vec<AxiomCheck>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&AxiomCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Comparison {
    /// `min (T_t φ − T_t ψ)` over the nodes.
    pub min_gap: f64,
    pub max_gap: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ModulusReport {
    pub t: f64,
    pub psi: String,
    pub method: &'static str,
    pub deltas: Vec<f64>,
    /// `ω(δ)` of `T_t ψ`.
    pub omega: Vec<f64>,
    /// `ω(δ)` of the sampled datum.
    pub data_omega: Vec<f64>,
    pub monotone: bool,
    /// Linear extrapolation of `ω` to `δ → 0`.
    pub omega_zero: f64,
    /// `ω(δ)` of the closed-form solution, when one is known.
    pub reference: Option<Vec<f64>>,
}

/// `sup |v(x) − v(y)|` over node pairs in `region` with `‖x − y‖ ≤ delta`.
pub fn empirical_modulus(v: &ValueGrid, region: &BoxDomain, delta: f64) -> f64 {
    let lattice = v.lattice();
    let d = lattice.dim();
    let dx = lattice.dx();
    let counts = lattice.counts();
    let reach: Vec<isize> = (0..2).map(|k| if k < d { (delta / dx[k] + 1e-9) as isize } else { 0 }).collect();
    let mut offsets = Vec::new();
    for j in -reach[1]..=reach[1] {
        for i in -reach[0]..=reach[0] {
            let dy = if d > 1 { j as f64 * dx[1] } else { 0.0 };
            let dx0 = i as f64 * dx[0];
            let r2 = dx0 * dx0 + dy * dy;
            // one of each symmetric pair
            if (j > 0 || (j == 0 && i > 0)) && r2 <= delta * delta * (1.0 + 1e-12) {
                offsets.push([i, j]);
            }
        }
    }
    let inside = lattice.nodes_in(region);
    let mut mask = alloc::vec![false; lattice.len()];
    for &n in &inside {
        mask[n] = true;
    }
    let vals = v.values();
    let mut best = 0.0_f64;
    for &n in &inside {
        let idx = lattice.multi_index(n);
        for off in &offsets {
            let i = idx[0] as isize + off[0];
            let j = idx[1] as isize + off[1];
            if i < 0 || j < 0 || i as usize >= counts[0] || (d > 1 && j as usize >= counts[1]) {
                continue;
            }
            let m = lattice.flat_index([i as usize, j as usize]);
            if mask[m] {
                best = best.max((vals[n] - vals[m]).abs());
            }
        }
    }
    best
}

/// Scalar diffusion coefficient of a one-dimensional constant model.
fn scalar_diffusion(model: &ModelSpec) -> Option<f64> {
    match (model.dim(), model.drift_family(), model.diffusion_family()) {
        (1, DriftFamily::BoxDrift, DiffusionFamily::Constant { a, .. }) => Some(a[0]),
        _ => None,
    }
}

/// Direction in which `ψ` is nondecreasing (`Some(0)` for constants).
fn monotone_direction(psi: &TestFunction) -> Option<i8> {
    let sign = |v: f64| if v > 0.0 { 1 } else if v < 0.0 { -1 } else { 0 };
    match psi {
        TestFunction::Constant(_) => Some(0),
        TestFunction::TanhAffine { w, amp, .. } => Some(sign(w[0] * amp)),
        TestFunction::PiecewiseLinearCapped { w, .. } => Some(sign(w[0])),
        TestFunction::IndicatorHalfspace { w, .. } => Some(-sign(w[0])),
        _ => None,
    }
}

fn constant_drift_oracle_available(model: &ModelSpec, psi: &TestFunction) -> bool {
    if scalar_diffusion(model).is_none() || psi.validate(1).is_err() {
        return false;
    }
    let c = model.controls();
    c.lo()[0] == c.hi()[0] || monotone_direction(psi).is_some()
}

/// `T_t(ψ)(x)` in closed form for one-dimensional box-drift models with
/// constant diffusion, when an optimal control is constant: either `F` is a
/// single point, or `ψ` is monotone and the extreme drift in its increasing
/// direction dominates every other path-wise.
pub fn constant_drift_oracle(model: &ModelSpec, psi: &TestFunction, x: &[f64], t: f64) -> Option<f64> {
    if !constant_drift_oracle_available(model, psi) || x.len() != 1 {
        return None;
    }
    let a = scalar_diffusion(model)?;
    let (lo, hi) = (model.controls().lo()[0], model.controls().hi()[0]);
    let f = if lo == hi {
        lo
    } else {
        match monotone_direction(psi)? {
            d if d < 0 => lo,
            _ => hi,
        }
    };
    let m = x[0] + f * t;
    let var = a * t;
    if var == 0.0 {
        return Some(psi.eval(&[m]));
    }
    let s = math::sqrt(var);
    Some(match psi {
        TestFunction::IndicatorHalfspace { w, c } => {
            let w = w[0];
            if w == 0.0 {
                psi.eval(&[m])
            } else if w > 0.0 {
                math::norm_cdf((c / w - m) / s)
            } else {
                math::norm_cdf((m - c / w) / s)
            }
        }
        TestFunction::GaussianBump { center, width, height } => {
            let tot = width * width + var;
            height * width / math::sqrt(tot) * math::exp(-(m - center[0]) * (m - center[0]) / (2.0 * tot))
        }
        _ => {
            let rule = QuadratureRule::gauss_hermite(1, 64).ok()?;
            rule.expect(|z| psi.eval(&[m + s * z[0]]))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn zero_horizon_is_sampling() {
        let s = catalog::box_drift(1.0).unwrap();
        for method in [Method::Pde, Method::dp()] {
            let lab = Semigroup::new(&s.model, &s.mesh, &s.grid, method).unwrap();
            let psi = TestFunction::halfspace(1);
            assert_eq!(lab.apply(&psi, 0.0).unwrap(), ValueGrid::sample(lab.lattice(), &psi));
        }
    }

    #[test]
    fn feller_rejects_zero_horizon() {
        let s = catalog::box_drift(1.0).unwrap();
        let lab = Semigroup::new(&s.model, &s.mesh, &s.grid, Method::dp()).unwrap();
        assert_eq!(lab.feller_modulus(&TestFunction::halfspace(1), 0.0, &[0.1]), Err(Error::ZeroHorizon));
    }

    #[test]
    fn modulus_of_a_step_is_one() {
        let s = catalog::box_drift(1.0).unwrap();
        let data = ValueGrid::sample(s.grid.lattice(), &TestFunction::halfspace(1));
        let region = s.grid.lattice().domain().middle_half();
        assert_eq!(empirical_modulus(&data, &region, 0.05), 1.0);
        // no node pair closer than dx
        assert_eq!(empirical_modulus(&data, &region, 0.01), 0.0);
    }

    #[test]
    fn modulus_of_a_linear_function() {
        let s = catalog::planar(1.0).unwrap();
        let v = ValueGrid::from_fn(s.grid.lattice(), 0.0, |x| 2.0 * x[0] - x[1]);
        let region = s.grid.lattice().domain().middle_half();
        // dx = 0.05, pairs within 0.25: offset (4, −3)·0.05 gives |2·0.2 + 0.15| = 0.55
        let w = empirical_modulus(&v, &region, 0.25);
        assert!((w - 0.55).abs() < 1e-12, "{w}");
    }

    #[test]
    fn oracle_picks_the_extreme_drift() {
        let s = catalog::box_drift(1.0).unwrap();
        let (x, t) = (0.3, 0.25);
        let h = constant_drift_oracle(&s.model, &TestFunction::halfspace(1), &[x], t).unwrap();
        assert!((h - math::norm_cdf((t - x) / 0.5)).abs() < 1e-15);
        let th = constant_drift_oracle(&s.model, &TestFunction::tanh(1), &[x], t).unwrap();
        assert!(th > libm::tanh(x));
        assert!(constant_drift_oracle(&s.model, &TestFunction::bump(1), &[x], t).is_none());
        let heat = catalog::heat(1.0).unwrap();
        let b = constant_drift_oracle(&heat.model, &TestFunction::bump(1), &[0.0], 1.0).unwrap();
        assert!((b - 1.0 / libm::sqrt(2.0)).abs() < 1e-15);
    }

    #[test]
    fn comparison_of_shifted_data_has_gap_one() {
        let s = catalog::box_drift(1.0).unwrap();
        let lab = Semigroup::new(&s.model, &s.mesh, &s.grid, Method::dp()).unwrap();
        let psi = ValueGrid::sample(lab.lattice(), &TestFunction::tanh(1));
        let c = lab.compare_grids(&psi, &psi.map(|v| v + 1.0), 0.3).unwrap();
        assert!(c.pass);
        assert!((c.min_gap - 1.0).abs() < 1e-12 && (c.max_gap - 1.0).abs() < 1e-12);
        assert!(lab.comparison_test(&TestFunction::Constant(2.0), &TestFunction::Constant(1.0), 0.1).is_err());
    }
}
