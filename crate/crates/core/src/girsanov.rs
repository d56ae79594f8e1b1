//! Density of the drifted law with respect to the driftless reference
//! diffusion, and Monte Carlo checks of its first two moments.
//!
//! Paths are simulated under the drifted measure, so the stored increment
//! `ΔX̄ = ΔX − b Δt` equals `σ ΔW` and `Z_t` is the product of per-step
//! factors `exp(−⟨a⁻¹b, ΔX̄⟩ − ½⟨b, a⁻¹b⟩Δt)`.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::mc::{self, density_increment, Estimate, PathEnsemble, PathRecord, Policy, SimOptions};
use crate::model::{ControlMesh, ModelSpec, Verdict};
use crate::MAX_DIM;

/// Allowance for the time-discretisation bias of `E[Z_t]`.
pub const EULER_ALLOWANCE: f64 = 1e-2;

/// Points sampled per mesh control when estimating the drift energy.
pub const ENERGY_SAMPLES: usize = 2000;

/// Euler–Maruyama ensemble of the diffusion with the drift switched off.
pub fn simulate_reference(
    model: &ModelSpec,
    x: &[f64],
    t: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    let mesh = ControlMesh::vertices(model.controls())?;
    let opts = SimOptions { zero_drift: true, ..SimOptions::default() };
    mc::simulate_with(model, &mesh, &Policy::Constant(0), x, t, n_paths, n_steps, seed, &opts)
}

/// Per-path `Z_t` rebuilt from recorded drifted paths.
pub fn density_z(model: &ModelSpec, mesh: &ControlMesh, record: &PathRecord) -> Result<Vec<f64>> {
    let d = record.dim;
    if d != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: d });
    }
    let dt = record.horizon / record.n_steps as f64;
    let mut b = [0.0; MAX_DIM];
    let mut s = [0.0; MAX_DIM * MAX_DIM];
    let mut dxbar = [0.0; MAX_DIM];
    let mut out = Vec::with_capacity(record.paths.len());
    for path in &record.paths {
        let mut log_z = 0.0;
        for k in 0..record.n_steps {
            let x = &path.states[k * d..(k + 1) * d];
            let y = &path.states[(k + 1) * d..(k + 2) * d];
            let c = path.controls[k];
            if c >= mesh.len() {
                return Err(Error::InvalidArgument(alloc::format!("recorded control {c} outside the mesh")));
            }
            if record.zero_drift {
                b[..d].iter_mut().for_each(|v| *v = 0.0);
            } else {
                model.drift_into(mesh.point(c), x, &mut b);
            }
            model.sigma_into(x, &mut s);
            for a in 0..d {
                dxbar[a] = y[a] - x[a] - b[a] * dt;
            }
            log_z += density_increment(&s[..d * d], d, &b[..d], &dxbar[..d], dt).log_increment();
        }
        out.push(math::exp(log_z));
    }
    Ok(out)
}

/// `C = sup ⟨b, a⁻¹b⟩` over the mesh and points drawn uniformly from the
/// box `[x − r, x + r]`, with `r` large enough to hold almost every path
/// up to time `t`.
pub fn drift_energy(model: &ModelSpec, mesh: &ControlMesh, x: &[f64], t: f64, seed: u64) -> f64 {
    let d = model.dim();
    let r = 1.0 + model.bound_c() * t + 6.0 * math::sqrt(model.bound_c() * t);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut y = [0.0; MAX_DIM];
    let mut b = [0.0; MAX_DIM];
    let mut s = [0.0; MAX_DIM * MAX_DIM];
    let mut u = [0.0; MAX_DIM];
    let mut best = 0.0_f64;
    for i in 0..=ENERGY_SAMPLES {
        for a in 0..d {
            y[a] = if i == 0 { x[a] } else { x[a] + rng.gen_range(-r..=r) };
        }
        model.sigma_into(&y[..d], &mut s);
        for f in mesh.points() {
            model.drift_into(f, &y[..d], &mut b);
            math::lower_solve(&s[..d * d], d, &b[..d], &mut u);
            best = best.max(u[..d].iter().map(|v| v * v).sum());
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ProfilePoint {
    pub time: f64,
    pub mean: f64,
    pub se: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct GirsanovReport {
    pub t: f64,
    pub policy: String,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub energy: f64,
    /// `e^{C t}`
    pub bound: f64,
    pub z: Estimate,
    pub z_squared: Estimate,
    pub abs_deviation: Estimate,
    /// `|E[Z_t] − 1| ≤ 3·SE + EULER_ALLOWANCE`
    pub martingale: Verdict,
    /// `E[Z_t²] ≤ e^{Ct}(1 + 3·relative SE)`
    pub second_moment: Verdict,
    /// `(E|1 − Z_t|)² ≤ e^{Ct} − 1 + 3·SE`
    pub l1_bound: Verdict,
    /// `E[Z_s]` at dyadic fractions of the horizon.
    pub profile: Vec<ProfilePoint>,
}

impl GirsanovReport {
    pub fn verdicts(&self) -> [Verdict; 3] {
        [self.martingale, self.second_moment, self.l1_bound]
    }

    pub fn passed(&self) -> bool {
        self.verdicts().iter().all(|v| *v == Verdict::Pass) && self.profile.iter().all(|p| p.pass)
    }
}

fn dyadic_steps(n_steps: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut k = n_steps;
    while k % 2 == 0 && k > 1 {
        k /= 2;
        out.push(k);
    }
    out.reverse();
    out
}

/// Simulates `Z` under the drifted law and checks the moment bounds at
/// horizon `t`.
#[allow(clippy::too_many_arguments)]
pub fn verify_bounds(
    model: &ModelSpec,
    mesh: &ControlMesh,
    policy: &Policy,
    x: &[f64],
    t: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<GirsanovReport> {
    let opts = SimOptions { track_density: true, zero_drift: false, checkpoints: dyadic_steps(n_steps) };
    let ens = mc::simulate_with(model, mesh, policy, x, t, n_paths, n_steps, seed, &opts)?;
    let energy = drift_energy(model, mesh, x, t, seed);
    let bound = math::exp(energy * t);

    let z: Vec<f64> = ens.girsanov_log.iter().map(|l| math::exp(*l)).collect();
    let z_est = Estimate::from_samples(&z);
    let z2 = Estimate::from_samples(&z.iter().map(|v| v * v).collect::<Vec<_>>());
    let dev = Estimate::from_samples(&z.iter().map(|v| (1.0 - v).abs()).collect::<Vec<_>>());

    let martingale = Verdict::from_bool((z_est.mean - 1.0).abs() <= 3.0 * z_est.se + EULER_ALLOWANCE);
    let rel = if z2.mean > 0.0 { z2.se / z2.mean } else { 0.0 };
    let second_moment = Verdict::from_bool(z2.mean <= bound * (1.0 + 3.0 * rel));
    // delta method: SE of the squared mean is 2·mean·SE
    let sq_se = 2.0 * dev.mean * dev.se;
    let l1_bound = Verdict::from_bool(dev.mean * dev.mean <= bound - 1.0 + 3.0 * sq_se);

    let profile = ens
        .checkpoints
        .iter()
        .map(|cp| {
            let e = Estimate::from_samples(&cp.log_density.iter().map(|l| math::exp(*l)).collect::<Vec<_>>());
            let pass = (e.mean - 1.0).abs() <= 3.0 * e.se + EULER_ALLOWANCE;
            ProfilePoint { time: cp.time, mean: e.mean, se: e.se, pass }
        })
        .collect();

    Ok(GirsanovReport {
        t,
        policy: policy.describe(),
        n_paths,
        n_steps,
        seed,
        energy,
        bound,
        z: z_est,
        z_squared: z2,
        abs_deviation: dev,
        martingale,
        second_moment,
        l1_bound,
        profile,
    })
}
