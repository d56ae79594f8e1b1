//! Euler–Maruyama simulation of the controlled diffusion under explicit
//! admissible policies, and the Monte Carlo lower bound on `T_t(ψ)(x)`.
//!
//! Every path owns a ChaCha8 stream selected by `(seed, path index)`; draws
//! within a path are consumed in step order, so an ensemble is bit-identical
//! under any parallel schedule, and different policies simulated with the
//! same seed share their Gaussian increments.

use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dp::FeedbackTable;
use crate::error::{Error, Result};
use crate::math;
use crate::model::{ControlBox, ControlMesh, ModelSpec};
use crate::test_fn::TestFunction;
use crate::MAX_DIM;

#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    /// A single mesh control for the whole horizon.
    Constant(usize),
    /// `controls[i]` is active on `[switch_times[i-1], switch_times[i])`.
    PiecewiseConstant { switch_times: Vec<f64>, controls: Vec<usize> },
    /// Argmax controls from the dynamic-programming oracle.
    Feedback(FeedbackTable),
}

impl Policy {
    pub fn validate(&self, mesh: &ControlMesh, t: f64) -> Result<()> {
        let in_mesh = |c: usize| {
            if c < mesh.len() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(alloc::format!("control index {c} outside mesh of {}", mesh.len())))
            }
        };
        match self {
            Policy::Constant(c) => in_mesh(*c),
            Policy::PiecewiseConstant { switch_times, controls } => {
                if controls.len() != switch_times.len() + 1 {
                    return Err(Error::InvalidArgument("need one more control than switch times".into()));
                }
                if switch_times.windows(2).any(|w| w[0] >= w[1])
                    || switch_times.iter().any(|s| !(*s >= 0.0 && *s <= t))
                {
                    return Err(Error::InvalidArgument(
                        "switch times must be strictly increasing inside [0, t]".into(),
                    ));
                }
                controls.iter().try_for_each(|c| in_mesh(*c))
            }
            Policy::Feedback(table) => {
                if (table.horizon() - t).abs() > 1e-12 * (1.0 + t) {
                    return Err(Error::InvalidArgument(alloc::format!(
                        "feedback table built for t = {}, used at t = {t}",
                        table.horizon()
                    )));
                }
                in_mesh(table.max_control())
            }
        }
    }

    /// Control used on step `j` of `n_steps` (starting at time `j·t/n_steps`).
    fn control(&self, j: usize, n_steps: usize, t: f64, x: &[f64]) -> usize {
        match self {
            Policy::Constant(c) => *c,
            Policy::PiecewiseConstant { switch_times, controls } => {
                let time = t * (j as f64 / n_steps as f64);
                controls[switch_times.iter().take_while(|s| **s <= time).count()]
            }
            Policy::Feedback(table) => {
                let elapsed = j * table.n_steps() / n_steps;
                table.control(table.n_steps() - elapsed, x)
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Policy::Constant(c) => alloc::format!("constant({c})"),
            Policy::PiecewiseConstant { switch_times, controls } => {
                alloc::format!("piecewise-constant(switch={switch_times:?}, controls={controls:?})")
            }
            Policy::Feedback(t) => alloc::format!("feedback-table(steps={})", t.n_steps()),
        }
    }
}

/// Log-density values of all paths at an intermediate step.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub step: usize,
    pub time: f64,
    pub log_density: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub start: Vec<f64>,
    pub horizon: f64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    /// `n_paths × d`, row-major.
    pub endpoints: Vec<f64>,
    /// Per-path `log Z_t`; empty unless density tracking was requested.
    pub girsanov_log: Vec<f64>,
    pub checkpoints: Vec<Checkpoint>,
}

impl PathEnsemble {
    pub fn dim(&self) -> usize {
        self.start.len()
    }

    pub fn endpoint(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.endpoints[i * d..(i + 1) * d]
    }

    pub fn endpoints(&self) -> impl Iterator<Item = &[f64]> {
        self.endpoints.chunks_exact(self.dim())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimOptions {
    /// Accumulate `log Z` along every path.
    pub track_density: bool,
    /// Simulate the driftless reference diffusion instead of the policy.
    pub zero_drift: bool,
    /// Steps (1-based, `≤ n_steps`) at which `log Z` is stored.
    pub checkpoints: Vec<usize>,
}

pub(crate) fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Per-step pieces of `log Z`: `martingale = −⟨a⁻¹b, ΔX̄⟩` and
/// `compensator = ½⟨b, a⁻¹b⟩Δt`, so that `Δ log Z = martingale − compensator`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityIncrement {
    pub martingale: f64,
    pub compensator: f64,
}

impl DensityIncrement {
    pub fn log_increment(&self) -> f64 {
        self.martingale - self.compensator
    }
}

/// Computes the log-density increment from the drift `b`, the lower
/// factor `σ` at the left end point, the increment `ΔX̄ = σΔW` and `Δt`.
/// Uses `⟨a⁻¹b, σΔW⟩ = ⟨σ⁻¹b, ΔW⟩` and `⟨b, a⁻¹b⟩ = ‖σ⁻¹b‖²`.
pub fn density_increment(sigma: &[f64], d: usize, b: &[f64], dxbar: &[f64], dt: f64) -> DensityIncrement {
    let mut u = [0.0; MAX_DIM];
    let mut dw = [0.0; MAX_DIM];
    math::lower_solve(sigma, d, b, &mut u);
    math::lower_solve(sigma, d, dxbar, &mut dw);
    let mut inner = 0.0;
    let mut energy = 0.0;
    for k in 0..d {
        inner += u[k] * dw[k];
        energy += u[k] * u[k];
    }
    DensityIncrement { martingale: -inner, compensator: 0.5 * energy * dt }
}

struct PathOutcome {
    end: [f64; MAX_DIM],
    log_z: f64,
    marks: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn run_path(
    model: &ModelSpec,
    mesh: &ControlMesh,
    policy: &Policy,
    x0: &[f64],
    t: f64,
    n_steps: usize,
    seed: u64,
    path: usize,
    opts: &SimOptions,
    mut record: Option<&mut PathTrace>,
) -> PathOutcome {
    let d = model.dim();
    let dt = t / n_steps as f64;
    let sq = math::sqrt(dt);
    let mut rng = path_rng(seed, path);
    let mut x = [0.0; MAX_DIM];
    x[..d].copy_from_slice(x0);
    let mut b = [0.0; MAX_DIM];
    let mut s = [0.0; MAX_DIM * MAX_DIM];
    let mut dw = [0.0; MAX_DIM];
    let mut sdw = [0.0; MAX_DIM];
    let mut log_z = 0.0;
    let mut marks = Vec::with_capacity(opts.checkpoints.len());
    if let Some(r) = record.as_deref_mut() {
        r.states.extend_from_slice(&x[..d]);
    }
    for j in 0..n_steps {
        let c = policy.control(j, n_steps, t, &x[..d]);
        if opts.zero_drift {
            b[..d].iter_mut().for_each(|v| *v = 0.0);
        } else {
            model.drift_into(mesh.point(c), &x[..d], &mut b);
        }
        model.sigma_into(&x[..d], &mut s);
        for w in dw.iter_mut().take(d) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *w = sq * z;
        }
        for a in 0..d {
            let mut acc = 0.0;
            for k in 0..=a {
                acc += s[a * d + k] * dw[k];
            }
            sdw[a] = acc;
        }
        if opts.track_density {
            log_z += density_increment(&s[..d * d], d, &b[..d], &sdw[..d], dt).log_increment();
        }
        for a in 0..d {
            x[a] += b[a] * dt + sdw[a];
        }
        if let Some(r) = record.as_deref_mut() {
            r.controls.push(c);
            r.increments.extend_from_slice(&dw[..d]);
            r.states.extend_from_slice(&x[..d]);
        }
        if opts.checkpoints.contains(&(j + 1)) {
            marks.push(log_z);
        }
    }
    PathOutcome { end: x, log_z, marks }
}

#[allow(clippy::too_many_arguments)]
fn check_inputs(model: &ModelSpec, mesh: &ControlMesh, policy: &Policy, x: &[f64], t: f64, n_paths: usize, n_steps: usize) -> Result<()> {
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: x.len() });
    }
    if mesh.control_dim() != model.control_dim() {
        return Err(Error::DimensionMismatch { expected: model.control_dim(), got: mesh.control_dim() });
    }
    if n_paths == 0 || n_steps == 0 {
        return Err(Error::InvalidArgument("n_paths and n_steps must be at least 1".into()));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(alloc::format!("invalid horizon {t}")));
    }
    policy.validate(mesh, t)
}

#[allow(clippy::too_many_arguments)]
pub fn simulate(
    model: &ModelSpec,
    mesh: &ControlMesh,
    policy: &Policy,
    x: &[f64],
    t: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    simulate_with(model, mesh, policy, x, t, n_paths, n_steps, seed, &SimOptions::default())
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_with(
    model: &ModelSpec,
    mesh: &ControlMesh,
    policy: &Policy,
    x: &[f64],
    t: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    opts: &SimOptions,
) -> Result<PathEnsemble> {
    check_inputs(model, mesh, policy, x, t, n_paths, n_steps)?;
    if opts.checkpoints.iter().any(|c| *c == 0 || *c > n_steps) {
        return Err(Error::InvalidArgument("checkpoints must lie in 1..=n_steps".into()));
    }
    let d = model.dim();
    let outcomes = math::map_indexed(n_paths, |p| run_path(model, mesh, policy, x, t, n_steps, seed, p, opts, None));
    let mut endpoints = Vec::with_capacity(n_paths * d);
    let mut girsanov_log = Vec::new();
    for o in &outcomes {
        endpoints.extend_from_slice(&o.end[..d]);
    }
    if opts.track_density {
        girsanov_log = outcomes.iter().map(|o| o.log_z).collect();
    }
    let mut marks: Vec<usize> = opts.checkpoints.clone();
    marks.sort_unstable();
    marks.dedup();
    let checkpoints = marks
        .iter()
        .enumerate()
        .map(|(i, &step)| Checkpoint {
            step,
            time: t * (step as f64 / n_steps as f64),
            log_density: outcomes.iter().map(|o| o.marks[i]).collect(),
        })
        .collect();
    Ok(PathEnsemble {
        start: x.to_vec(),
        horizon: t,
        n_paths,
        n_steps,
        seed,
        endpoints,
        girsanov_log,
        checkpoints,
    })
}

/// Full record of a few paths: states, controls and Brownian increments.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PathTrace {
    /// `(n_steps + 1) × d`
    pub states: Vec<f64>,
    pub controls: Vec<usize>,
    /// `n_steps × d` Brownian increments `ΔW`.
    pub increments: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub dim: usize,
    pub horizon: f64,
    pub n_steps: usize,
    pub zero_drift: bool,
    pub paths: Vec<PathTrace>,
}

/// Same dynamics and random streams as [`simulate`], keeping every state.
#[allow(clippy::too_many_arguments)]
pub fn record_paths(
    model: &ModelSpec,
    mesh: &ControlMesh,
    policy: &Policy,
    x: &[f64],
    t: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<PathRecord> {
    check_inputs(model, mesh, policy, x, t, n_paths, n_steps)?;
    let opts = SimOptions::default();
    let paths = (0..n_paths)
        .map(|p| {
            let mut trace = PathTrace::default();
            run_path(model, mesh, policy, x, t, n_steps, seed, p, &opts, Some(&mut trace));
            trace
        })
        .collect();
    Ok(PathRecord { dim: model.dim(), horizon: t, n_steps, zero_drift: false, paths })
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let (mean, se) = math::mean_and_se(samples);
        Estimate { mean, se, n: samples.len() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBound {
    pub value: f64,
    pub se: f64,
    pub best_policy: usize,
    pub estimates: Vec<Estimate>,
}

/// Largest Monte Carlo mean of `ψ(X_t)` over the given policies, all
/// simulated with common random numbers.
#[allow(clippy::too_many_arguments)]
pub fn lower_bound(
    model: &ModelSpec,
    mesh: &ControlMesh,
    psi: &TestFunction,
    x: &[f64],
    t: f64,
    policies: &[Policy],
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<LowerBound> {
    if policies.is_empty() {
        return Err(Error::InvalidArgument("at least one policy is required".into()));
    }
    psi.validate(model.dim())?;
    let mut estimates = Vec::with_capacity(policies.len());
    for p in policies {
        let ens = simulate(model, mesh, p, x, t, n_paths, n_steps, seed)?;
        let vals: Vec<f64> = ens.endpoints().map(|e| psi.eval(e)).collect();
        estimates.push(Estimate::from_samples(&vals));
    }
    let mut best = 0;
    for (i, e) in estimates.iter().enumerate() {
        if e.mean > estimates[best].mean {
            best = i;
        }
    }
    Ok(LowerBound { value: estimates[best].mean, se: estimates[best].se, best_policy: best, estimates })
}

/// One constant policy per mesh point.
pub fn constant_policies(mesh: &ControlMesh) -> Vec<Policy> {
    (0..mesh.len()).map(Policy::Constant).collect()
}

/// Constant policies at the mesh points that are vertices of `controls`.
pub fn vertex_policies(controls: &ControlBox, mesh: &ControlMesh) -> Vec<Policy> {
    mesh.points()
        .enumerate()
        .filter(|(_, f)| f.iter().enumerate().all(|(k, v)| *v == controls.lo()[k] || *v == controls.hi()[k]))
        .map(|(i, _)| Policy::Constant(i))
        .collect()
}
