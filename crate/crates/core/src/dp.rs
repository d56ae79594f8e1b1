//! Backward dynamic programming over frozen controls.
//!
//! One backup step of length `Δt` is
//!
//! ```text
//! v_{k+1}(x) = max_{f ∈ mesh} Σ_j w_j · ṽ_k(x + b(f, x) Δt + σ(x) √Δt ξ_j)
//! ```
//!
//! where `(ξ_j, w_j)` is a tensor Gauss–Hermite rule for the standard normal
//! law and `ṽ_k` is the multilinear interpolant of the previous slice. The
//! computation shares nothing with the finite-difference scheme beyond the
//! model itself.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{BoxDomain, GridSpec, Lattice, ValueGrid};
use crate::math;
use crate::model::{ControlMesh, ModelSpec};
use crate::test_fn::TestFunction;
use crate::MAX_DIM;

/// Default number of Gauss–Hermite nodes per axis.
pub const DEFAULT_ORDER: usize = 5;

/// Gauss–Hermite nodes and weights for the `n`-point rule with weight
/// `e^{-x²}` (physicists' convention), by Newton iteration on the
/// orthonormal recurrence. Nodes are returned in increasing order.
fn hermite_physicists(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let pim4 = 0.751_125_544_464_942_5; // π^{-1/4}
    let nf = n as f64;
    let half = n.div_ceil(2);
    let mut z = 0.0_f64;
    for i in 0..half {
        z = match i {
            0 => math::sqrt(2.0 * nf + 1.0) - 1.855_75 * libm::pow(2.0 * nf + 1.0, -1.0 / 6.0),
            1 => z - 1.14 * libm::pow(nf, 0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * math::sqrt(2.0 / jf) * p2 - math::sqrt((jf - 1.0) / jf) * p3;
            }
            pp = math::sqrt(2.0 * nf) * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * (1.0 + z.abs()) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    x.reverse();
    w.reverse();
    (x, w)
}

/// Tensor Gauss–Hermite rule for `N(0, I_d)`, normalised so that the
/// weights sum to one and the first two moments are exact.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    dim: usize,
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn gauss_hermite(dim: usize, order: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Dimension { got: dim, max: MAX_DIM });
        }
        if !(2..=200).contains(&order) {
            return Err(Error::InvalidArgument(alloc::format!(
                "Gauss-Hermite order must be in 2..=200, got {order}"
            )));
        }
        let (x, w) = hermite_physicists(order);
        let mut xi: Vec<f64> = x.iter().map(|v| v * core::f64::consts::SQRT_2).collect();
        let mut wt: Vec<f64> = w.iter().map(|v| v / math::sqrt(core::f64::consts::PI)).collect();
        // Exact symmetry, unit mass, unit variance.
        for i in 0..order / 2 {
            let j = order - 1 - i;
            let m = 0.5 * (xi[j] - xi[i]);
            xi[i] = -m;
            xi[j] = m;
            let ww = 0.5 * (wt[i] + wt[j]);
            wt[i] = ww;
            wt[j] = ww;
        }
        let mass: f64 = wt.iter().sum();
        wt.iter_mut().for_each(|v| *v /= mass);
        let var: f64 = wt.iter().zip(&xi).map(|(w, x)| w * x * x).sum();
        let s = math::sqrt(var);
        xi.iter_mut().for_each(|v| *v /= s);

        let total = libm::pow(order as f64, dim as f64) as usize;
        let mut nodes = Vec::with_capacity(total * dim);
        let mut weights = Vec::with_capacity(total);
        for idx in 0..total {
            let mut rem = idx;
            let mut weight = 1.0;
            for _ in 0..dim {
                let k = rem % order;
                rem /= order;
                nodes.push(xi[k]);
                weight *= wt[k];
            }
            weights.push(weight);
        }
        Ok(Self { dim, order, nodes, weights })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, j: usize) -> &[f64] {
        &self.nodes[j * self.dim..(j + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫ g dN(0, I)` by the rule.
    pub fn expect(&self, mut g: impl FnMut(&[f64]) -> f64) -> f64 {
        (0..self.len()).map(|j| self.weights[j] * g(self.node(j))).sum()
    }

    /// Largest deviations from `Σw = 1`, `Σwξ = 0` and `Σwξξ* = I`.
    pub fn moment_errors(&self) -> [f64; 3] {
        let d = self.dim;
        let mass: f64 = self.weights.iter().sum();
        let mut mean_err = 0.0_f64;
        let mut cov_err = 0.0_f64;
        for a in 0..d {
            let m: f64 = (0..self.len()).map(|j| self.weights[j] * self.node(j)[a]).sum();
            mean_err = mean_err.max(m.abs());
            for b in 0..d {
                let c: f64 = (0..self.len())
                    .map(|j| self.weights[j] * self.node(j)[a] * self.node(j)[b])
                    .sum();
                let target = if a == b { 1.0 } else { 0.0 };
                cov_err = cov_err.max((c - target).abs());
            }
        }
        [(mass - 1.0).abs(), mean_err, cov_err]
    }
}

/// Maximising control index per node for every backup step.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackTable {
    lattice: Lattice,
    horizon: f64,
    n_steps: usize,
    /// `controls[(k - 1) · nodes + node]` is the control used by the backup
    /// that produced `v_k`, i.e. with `k` steps remaining.
    controls: Vec<u32>,
}

impl FeedbackTable {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn max_control(&self) -> usize {
        self.controls.iter().copied().max().unwrap_or(0) as usize
    }

    /// Control at state `x` with `remaining` backup steps to go (nearest
    /// node lookup).
    pub fn control(&self, remaining: usize, x: &[f64]) -> usize {
        let k = remaining.clamp(1, self.n_steps);
        let node = self.lattice.nearest_node(x);
        self.controls[(k - 1) * self.lattice.len() + node] as usize
    }
}

#[derive(Debug, Clone)]
pub struct DpSolver {
    model: ModelSpec,
    mesh: ControlMesh,
    lattice: Lattice,
    rule: QuadratureRule,
    /// `[node][control][axis]`
    drift: Vec<f64>,
    /// `[node][d·d]`
    sigma: Vec<f64>,
}

impl DpSolver {
    pub fn new(model: &ModelSpec, mesh: &ControlMesh, lattice: &Lattice, rule: QuadratureRule) -> Result<Self> {
        let d = lattice.dim();
        if model.dim() != d || rule.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: model.dim().max(rule.dim()) });
        }
        if mesh.control_dim() != model.control_dim() {
            return Err(Error::DimensionMismatch { expected: model.control_dim(), got: mesh.control_dim() });
        }
        for (axis, &n) in lattice.counts().iter().enumerate() {
            if n < 2 {
                return Err(Error::GridTooCoarse { axis, nodes: n });
            }
        }
        let n = lattice.len();
        let nc = mesh.len();
        let mut drift = vec![0.0; n * nc * d];
        let mut sigma = vec![0.0; n * d * d];
        let mut x = [0.0; 2];
        for node in 0..n {
            lattice.node_into(node, &mut x);
            for (c, f) in mesh.points().enumerate() {
                model.drift_into(f, &x[..d], &mut drift[(node * nc + c) * d..(node * nc + c + 1) * d]);
            }
            model.sigma_into(&x[..d], &mut sigma[node * d * d..(node + 1) * d * d]);
        }
        Ok(Self { model: model.clone(), mesh: mesh.clone(), lattice: lattice.clone(), rule, drift, sigma })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn mesh(&self) -> &ControlMesh {
        &self.mesh
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// Value and maximising control of one backup at `node`.
    fn backup_node(&self, v: &ValueGrid, node: usize, dt: f64) -> (f64, u32) {
        let d = self.lattice.dim();
        let nc = self.mesh.len();
        let nq = self.rule.len();
        let mut x = [0.0; 2];
        self.lattice.node_into(node, &mut x);
        let sq = math::sqrt(dt);
        let sig = &self.sigma[node * d * d..(node + 1) * d * d];

        // σ √Δt ξ_j for every quadrature node; d ≤ 2 keeps this on the stack
        // for the default order.
        let mut shifts = [[0.0_f64; 2]; 64];
        let mut heap = Vec::new();
        let shift_buf: &mut [[f64; 2]] = if nq <= 64 {
            &mut shifts[..nq]
        } else {
            heap.resize(nq, [0.0; 2]);
            &mut heap
        };
        for (j, s) in shift_buf.iter_mut().enumerate() {
            let xi = self.rule.node(j);
            for a in 0..d {
                let mut acc = 0.0;
                for b in 0..=a {
                    acc += sig[a * d + b] * xi[b];
                }
                s[a] = sq * acc;
            }
        }

        let w = self.rule.weights();
        if d == 2 && sig[2] == 0.0 && nq <= 64 {
            return self.backup_node_separable(v, &x, shift_buf, dt, node);
        }
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0u32;
        let base = node * nc * d;
        let mut y = [0.0; 2];
        for c in 0..nc {
            let b = &self.drift[base + c * d..base + (c + 1) * d];
            let mut centre = [0.0; 2];
            for a in 0..d {
                centre[a] = x[a] + b[a] * dt;
            }
            for a in 0..d {
                y[a] = centre[a] + shift_buf[0][a];
            }
            let first = v.interpolate(&y[..d]);
            let mut acc = 0.0;
            for j in 1..nq {
                for a in 0..d {
                    y[a] = centre[a] + shift_buf[j][a];
                }
                acc += w[j] * (v.interpolate(&y[..d]) - first);
            }
            let val = first + acc;
            if val > best {
                best = val;
                arg = c as u32;
            }
        }
        (best, arg)
    }

    /// Two-dimensional backup with a diagonal factor: the quadrature points
    /// form a tensor grid, so cell lookups are done once per axis.
    fn backup_node_separable(&self, v: &ValueGrid, x: &[f64; 2], shifts: &[[f64; 2]], dt: f64, node: usize) -> (f64, u32) {
        let q = self.rule.order();
        let nc = self.mesh.len();
        let w = self.rule.weights();
        let vals = v.values();
        let n0 = self.lattice.counts()[0];
        let mut cells = [[(0usize, 0.0f64); 8]; 2];
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0u32;
        for c in 0..nc {
            let b = &self.drift[(node * nc + c) * 2..(node * nc + c + 1) * 2];
            for a in 0..2 {
                let centre = x[a] + b[a] * dt;
                for k in 0..q {
                    // node j = k0 + q·k1 shifts axis a by shifts[k·q^a][a]
                    let j = if a == 0 { k } else { k * q };
                    cells[a][k] = self.lattice.locate(a, centre + shifts[j][a]);
                }
            }
            let at = |k0: usize, k1: usize| {
                let (i, s) = cells[0][k0];
                let (j, t) = cells[1][k1];
                let r0 = j * n0 + i;
                let r1 = r0 + n0;
                let lo = vals[r0] + s * (vals[r0 + 1] - vals[r0]);
                let hi = vals[r1] + s * (vals[r1 + 1] - vals[r1]);
                lo + t * (hi - lo)
            };
            let first = at(0, 0);
            let mut acc = 0.0;
            for j in 1..q * q {
                acc += w[j] * (at(j % q, j / q) - first);
            }
            let val = first + acc;
            if val > best {
                best = val;
                arg = c as u32;
            }
        }
        (best, arg)
    }

    fn backup(&self, v: &ValueGrid, dt: f64) -> (ValueGrid, Vec<u32>) {
        let out = math::map_indexed(self.lattice.len(), |n| self.backup_node(v, n, dt));
        let (vals, args): (Vec<f64>, Vec<u32>) = out.into_iter().unzip();
        (ValueGrid::from_parts(self.lattice.clone(), vals, v.time() + dt), args)
    }

    fn check(&self, v0: &ValueGrid, t: f64, n_steps: usize) -> Result<()> {
        if v0.lattice() != &self.lattice {
            return Err(Error::InvalidGrid("initial datum does not match the solver lattice".into()));
        }
        if n_steps == 0 {
            return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(alloc::format!("invalid horizon {t}")));
        }
        Ok(())
    }

    pub fn solve(&self, psi: &TestFunction, t: f64, n_steps: usize) -> Result<ValueGrid> {
        psi.validate(self.lattice.dim())?;
        self.solve_from(&ValueGrid::sample(&self.lattice, psi), t, n_steps)
    }

    pub fn solve_from(&self, v0: &ValueGrid, t: f64, n_steps: usize) -> Result<ValueGrid> {
        self.check(v0, t, n_steps)?;
        let dt = t / n_steps as f64;
        let mut v = v0.clone();
        for _ in 0..n_steps {
            v = self.backup(&v, dt).0;
        }
        Ok(v.with_time(v0.time() + t))
    }

    /// Like [`DpSolver::solve_from`], also returning the argmax controls.
    pub fn solve_with_policy(&self, v0: &ValueGrid, t: f64, n_steps: usize) -> Result<(ValueGrid, FeedbackTable)> {
        self.check(v0, t, n_steps)?;
        let dt = t / n_steps as f64;
        let mut v = v0.clone();
        let mut controls = Vec::with_capacity(n_steps * self.lattice.len());
        for _ in 0..n_steps {
            let (next, args) = self.backup(&v, dt);
            controls.extend_from_slice(&args);
            v = next;
        }
        let table = FeedbackTable { lattice: self.lattice.clone(), horizon: t, n_steps, controls };
        Ok((v.with_time(v0.time() + t), table))
    }
}

/// Backup step as a multiple of the smallest lattice spacing.
pub const STEP_PER_SPACING: f64 = 0.25;

/// `STEP_PER_SPACING · min dx`. Each backup interpolates once, adding a
/// variance of order `dx²`, so steps much shorter than `dx` over-diffuse;
/// steps much longer leave the `order`-point transition too coarse for
/// discontinuous data.
pub fn default_step(lattice: &Lattice) -> f64 {
    STEP_PER_SPACING * lattice.dx().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Number of backup steps of length close to `step` covering `t`.
pub fn steps_for(t: f64, step: f64) -> usize {
    (math::round(t / step) as usize).max(1)
}

/// Convenience wrapper: builds the solver on the spatial part of `grid`.
pub fn solve_dp(
    model: &ModelSpec,
    mesh: &ControlMesh,
    grid: &GridSpec,
    psi: &TestFunction,
    t: f64,
    n_steps: usize,
    rule: QuadratureRule,
) -> Result<ValueGrid> {
    DpSolver::new(model, mesh, grid.lattice(), rule)?.solve(psi, t, n_steps)
}

/// `‖T_{t+s} ψ − T_t(T_s ψ)‖_∞` on the middle half of the domain, with
/// backup steps of length close to `step`.
pub fn markov_consistency(solver: &DpSolver, psi: &TestFunction, s: f64, t: f64, step: f64) -> Result<f64> {
    if !(s > 0.0 && t > 0.0) {
        return Err(Error::InvalidArgument("s and t must be positive".into()));
    }
    let v0 = ValueGrid::sample(solver.lattice(), psi);
    let whole = solver.solve_from(&v0, s + t, steps_for(s + t, step))?;
    let first = solver.solve_from(&v0, s, steps_for(s, step))?;
    let composed = solver.solve_from(&first, t, steps_for(t, step))?;
    let region: BoxDomain = solver.lattice().domain().middle_half();
    Ok(whole.max_abs_diff_on(&composed, &region))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ControlBox, DiffusionFamily, DriftFamily};

    #[test]
    fn moment_identities_hold() {
        for d in 1..=3 {
            for q in [2, 3, 5, 8, 20] {
                let r = QuadratureRule::gauss_hermite(d, q).unwrap();
                let e = r.moment_errors();
                assert!(e.iter().all(|v| *v < 1e-12), "d={d} q={q} {e:?}");
            }
        }
    }

    #[test]
    fn five_point_rule_integrates_degree_nine() {
        let r = QuadratureRule::gauss_hermite(1, 5).unwrap();
        // E Z^4 = 3, E Z^6 = 15, E Z^8 = 105, odd moments vanish
        assert!((r.expect(|x| x[0].powi(4)) - 3.0).abs() < 1e-12);
        assert!((r.expect(|x| x[0].powi(6)) - 15.0).abs() < 1e-11);
        assert!((r.expect(|x| x[0].powi(8)) - 105.0).abs() < 1e-10);
        assert!(r.expect(|x| x[0].powi(9)).abs() < 1e-10);
    }

    #[test]
    fn high_order_rule_matches_known_gaussian_integral() {
        // E cos(Z) = e^{-1/2}
        let r = QuadratureRule::gauss_hermite(1, 60).unwrap();
        assert!((r.expect(|x| libm::cos(x[0])) - libm::exp(-0.5)).abs() < 1e-13);
    }

    #[test]
    fn order_one_is_rejected() {
        assert!(QuadratureRule::gauss_hermite(1, 1).is_err());
    }

    fn solver(lo: f64, hi: f64) -> DpSolver {
        let m = ModelSpec::new(
            1,
            DriftFamily::BoxDrift,
            DiffusionFamily::scalar(1, 1.0).unwrap(),
            ControlBox::cube(1, lo, hi).unwrap(),
            2.0,
        )
        .unwrap();
        let mesh = ControlMesh::uniform(m.controls(), &[0.5]).unwrap();
        let lattice = Lattice::new(BoxDomain::cube(1, -4.0, 4.0).unwrap(), &[0.05]).unwrap();
        DpSolver::new(&m, &mesh, &lattice, QuadratureRule::gauss_hermite(1, 5).unwrap()).unwrap()
    }

    #[test]
    fn constants_are_reproduced_exactly() {
        let s = solver(-1.0, 1.0);
        for n in [1, 3, 17] {
            let v = s.solve(&TestFunction::Constant(0.3), 0.4, n).unwrap();
            assert!(v.values().iter().all(|x| *x == 0.3));
        }
    }

    #[test]
    fn zero_steps_is_an_error() {
        let s = solver(-1.0, 1.0);
        assert!(s.solve(&TestFunction::tanh(1), 0.4, 0).is_err());
    }

    #[test]
    fn feedback_table_picks_upper_drift_for_increasing_data() {
        let s = solver(-1.0, 1.0);
        let v0 = ValueGrid::sample(s.lattice(), &TestFunction::tanh(1));
        let (_, table) = s.solve_with_policy(&v0, 0.2, 4).unwrap();
        let top = s.mesh().len() - 1;
        for k in 1..=4 {
            assert_eq!(table.control(k, &[0.3]), top);
        }
    }

    #[test]
    fn markov_gap_of_constant_is_zero() {
        let s = solver(-1.0, 1.0);
        assert_eq!(markov_consistency(&s, &TestFunction::Constant(2.0), 0.2, 0.3, 0.05).unwrap(), 0.0);
    }

    #[test]
    fn value_iteration_is_nonexpansive() {
        let s = solver(-1.0, 1.0);
        let a = ValueGrid::sample(s.lattice(), &TestFunction::bump(1));
        let b = ValueGrid::sample(s.lattice(), &TestFunction::tanh(1));
        let mut va = a.clone();
        let mut vb = b.clone();
        let mut gap = a.zip_with(&b, |x, y| (x - y).abs()).max();
        for _ in 0..5 {
            va = s.solve_from(&va, 0.05, 1).unwrap();
            vb = s.solve_from(&vb, 0.05, 1).unwrap();
            let g = va.zip_with(&vb, |x, y| (x - y).abs()).max();
            assert!(g <= gap + 1e-14);
            gap = g;
        }
    }
}
