//! Execution of the single command named in a [`RunConfig`].

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use driftlab_core::dp::{self, DpSolver, QuadratureRule};
use driftlab_core::girsanov::verify_bounds;
use driftlab_core::lab::constant_drift_oracle;
use driftlab_core::mc::{constant_policies, lower_bound, vertex_policies};
use driftlab_core::model::check_conditions;
use driftlab_core::pde::residual;
use driftlab_core::{
    ControlMesh, ExplicitScheme, GridSpec, Method, ModelSpec, Policy, Semigroup, TestFunction, ValueGrid, Verdict,
};

use crate::config::{CommandBlock, MethodBlock, MethodName, PolicySet, RunConfig};
use crate::error::{CliError, CliResult};
use crate::export::{ArtifactDir, DomainMeta, EnsembleSummary, GridMeta};

/// Result of a run: the overall verdict and the human-readable summary
/// that was also written to `summary.txt`.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    pub summary: String,
}

struct Run<'a> {
    cfg: &'a RunConfig,
    model: ModelSpec,
    mesh: ControlMesh,
    grid: GridSpec,
    psi: TestFunction,
    out: ArtifactDir,
    lines: Vec<String>,
    passed: bool,
}

/// Executes the configured command and writes its artifacts into `out`.
pub fn run(cfg: &RunConfig, out: &Path) -> CliResult<Outcome> {
    let model = cfg.build_model()?;
    let mesh = cfg.build_mesh(&model)?;
    let grid = cfg.build_grid(&model, &mesh)?;
    let psi = cfg.function.build();
    psi.validate(model.dim())?;
    let hash = cfg.hash();
    let mut out = ArtifactDir::create(out, &hash)?;
    out.text("config.toml", &cfg.echo())?;

    let mut run = Run { cfg, model, mesh, grid, psi, out, lines: Vec::new(), passed: true };
    run.dispatch()?;

    let mut summary = String::new();
    let _ = writeln!(summary, "command: {}", cfg.command.name());
    let _ = writeln!(summary, "config hash: {hash}");
    let _ = writeln!(summary, "seed: {}", cfg.seed);
    for line in &run.lines {
        let _ = writeln!(summary, "{line}");
    }
    let _ = writeln!(summary, "verdict: {}", if run.passed { "PASS" } else { "FAIL" });
    run.out.text("summary.txt", &summary)?;
    Ok(Outcome { passed: run.passed, summary })
}

#[derive(Serialize)]
struct OracleCheck {
    t: f64,
    method: &'static str,
    nodes: usize,
    max_error: f64,
    tolerance: f64,
    pass: bool,
}

#[derive(Serialize)]
struct GapReport {
    s: f64,
    t: f64,
    method: &'static str,
    gap: f64,
    tolerance: f64,
    pass: bool,
}

#[derive(Serialize)]
struct PolicyEstimate {
    policy: String,
    mean: f64,
    se: f64,
}

#[derive(Serialize)]
struct LowerBoundReport {
    x: Vec<f64>,
    t: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    best: usize,
    value: f64,
    se: f64,
    dp_value: Option<f64>,
    dp_steps: Option<usize>,
    tolerance: f64,
    pass: bool,
    policies: Vec<PolicyEstimate>,
}

#[derive(Serialize)]
struct ResidualLevel {
    dx: Vec<f64>,
    dt: f64,
    interior_sup: f64,
    interior_mean: f64,
}

#[derive(Serialize)]
struct ResidualStudy {
    times: Vec<f64>,
    base: ResidualLevel,
    refined: ResidualLevel,
    ratio: f64,
    tolerance: Option<f64>,
    pass: bool,
}

fn method_block(method: MethodName, dp_step: Option<f64>, dp_order: Option<usize>) -> MethodBlock {
    MethodBlock { method, dp_step, dp_order }
}

fn mark(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

impl Run<'_> {
    fn verdict(&mut self, name: &str, pass: bool, detail: String) {
        self.passed &= pass;
        self.lines.push(format!("{name}: {} ({detail})", mark(pass)));
    }

    fn note(&mut self, line: String) {
        self.lines.push(line);
    }

    fn semigroup(&self, m: &MethodBlock) -> CliResult<Semigroup> {
        Ok(Semigroup::new(&self.model, &self.mesh, &self.grid, m.build())?)
    }

    fn point(&self, x: &[f64]) -> CliResult<Vec<f64>> {
        if x.len() != self.model.dim() {
            return Err(CliError::config(
                "command.x",
                format!("expected {} coordinates, got {}", self.model.dim(), x.len()),
            ));
        }
        Ok(x.to_vec())
    }

    fn grid_meta(&self, t: f64, sg: &Semigroup) -> GridMeta {
        let lattice = sg.lattice();
        GridMeta {
            t,
            dx: lattice.dx().to_vec(),
            dt: sg.dp_step().unwrap_or(self.grid.dt()),
            domain: DomainMeta { lo: lattice.domain().lo().to_vec(), hi: lattice.domain().hi().to_vec() },
            model_hash: self.cfg.model_hash(),
            method: sg.method().tag().to_string(),
            config_hash: self.cfg.hash(),
        }
    }

    /// Reports whether the middle half of the domain leaves room for the
    /// spread `C t + 6 √(C t)` of the process on each side.
    fn margin_note(&mut self, t: f64) {
        let domain = self.grid.lattice().domain();
        let margin = domain.widths().fold(f64::INFINITY, f64::min) / 4.0;
        let ct = self.model.bound_c() * t;
        let spread = ct + 6.0 * ct.sqrt();
        let state = if margin >= spread { "adequate" } else { "short, boundary effects may reach the reporting region" };
        self.note(format!("domain margin {margin} vs spread {spread:.4} at t = {t}: {state}"));
    }

    fn dispatch(&mut self) -> CliResult<()> {
        match self.cfg.command.clone() {
            CommandBlock::CheckConditions { samples } => self.check_conditions(samples),
            CommandBlock::SolvePde { t, oracle, tolerance } => {
                self.solve(method_block(MethodName::Pde, None, None), t, oracle, tolerance)
            }
            CommandBlock::SolveDp { t, dp_step, dp_order, oracle, tolerance } => {
                self.solve(method_block(MethodName::Dp, dp_step, dp_order), t, oracle, tolerance)
            }
            CommandBlock::SemigroupGap { s, t, method, dp_step, dp_order, tolerance } => {
                self.semigroup_gap(method_block(method, dp_step, dp_order), s, t, tolerance)
            }
            CommandBlock::AxiomSuite { times, pairs, pool, method, dp_step, dp_order } => {
                self.axiom_suite(method_block(method, dp_step, dp_order), &times, pairs, pool)
            }
            CommandBlock::FellerReport { t, deltas, method, dp_step, dp_order, tolerance } => {
                self.feller_report(method_block(method, dp_step, dp_order), t, &deltas, tolerance)
            }
            CommandBlock::McLowerBound { x, t, n_paths, n_steps, policies, compare_dp, tolerance } => {
                self.mc_lower_bound(&x, t, n_paths, n_steps, policies, compare_dp, tolerance)
            }
            CommandBlock::GirsanovCheck { x, t, n_paths, n_steps, control } => {
                self.girsanov_check(&x, t, n_paths, n_steps, control)
            }
            CommandBlock::ResidualStudy { times, tolerance } => self.residual_study(&times, tolerance),
        }
    }

    fn check_conditions(&mut self, samples: usize) -> CliResult<()> {
        let domain = self.cfg.build_domain()?;
        let r = check_conditions(&self.model, &self.mesh, &domain, samples, self.cfg.seed)?;
        self.out.json("conditions.json", &r)?;
        let show = |v: Verdict| match v {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Unknown => "UNKNOWN",
        };
        self.note(format!("drift bound: {} (sup |b| = {} vs C = {})", show(r.drift_bound), r.drift_norm_max, r.bound_c));
        self.note(format!("ellipticity: {} (eigenvalues in [{}, {}])", show(r.ellipticity), r.eigen_min, r.eigen_max));
        self.note(format!("factorization: {} (residual {})", show(r.factorization), r.factor_residual));
        self.note(format!("convexity: {}", show(r.convexity)));
        self.note(format!("Lipschitz constants: drift {}, sigma {}", r.lipschitz_drift, r.lipschitz_sigma));
        self.passed &= !r.any_failed();
        Ok(())
    }

    fn solve(&mut self, m: MethodBlock, t: f64, oracle: bool, tolerance: f64) -> CliResult<()> {
        self.margin_note(t);
        let sg = self.semigroup(&m)?;
        let v = sg.apply(&self.psi, t)?;
        let meta = self.grid_meta(t, &sg);
        self.out.grid("value", &v, &meta)?;
        self.note(format!("{} solution at t = {t}: min {}, max {}", sg.method().tag(), v.min(), v.max()));
        if oracle {
            let check = self.oracle_check(&sg, &v, t, tolerance)?;
            self.out.json("oracle.json", &check)?;
            self.verdict(
                "closed-form agreement",
                check.pass,
                format!("max error {:.3e} over {} nodes, tolerance {tolerance:e}", check.max_error, check.nodes),
            );
        }
        Ok(())
    }

    fn oracle_check(&self, sg: &Semigroup, v: &ValueGrid, t: f64, tolerance: f64) -> CliResult<OracleCheck> {
        let lattice = sg.lattice();
        let nodes = lattice.nodes_in(&lattice.domain().middle_half());
        let mut max_error = 0.0_f64;
        for &node in &nodes {
            let x = lattice.node(node);
            let exact = constant_drift_oracle(&self.model, &self.psi, &x, t).ok_or_else(|| {
                CliError::config("command.oracle", "no closed-form solution is known for this model and function")
            })?;
            max_error = max_error.max((v.values()[node] - exact).abs());
        }
        Ok(OracleCheck {
            t,
            method: sg.method().tag(),
            nodes: nodes.len(),
            max_error,
            tolerance,
            pass: max_error <= tolerance,
        })
    }

    fn semigroup_gap(&mut self, m: MethodBlock, s: f64, t: f64, tolerance: f64) -> CliResult<()> {
        self.margin_note(s + t);
        let sg = self.semigroup(&m)?;
        let gap = sg.semigroup_gap(&self.psi, s, t)?;
        let pass = gap <= tolerance;
        self.out.json("gap.json", &GapReport { s, t, method: sg.method().tag(), gap, tolerance, pass })?;
        self.verdict("semigroup identity", pass, format!("gap {gap:.3e}, tolerance {tolerance:e}"));
        Ok(())
    }

    fn axiom_suite(&mut self, m: MethodBlock, times: &[f64], pairs: usize, pool: usize) -> CliResult<()> {
        let sg = self.semigroup(&m)?;
        let mut functions = vec![self.psi.clone()];
        functions.extend(TestFunction::random_pool(self.model.dim(), pool, self.cfg.seed));
        let report = sg.axiom_suite(&functions, times, pairs, self.cfg.seed)?;
        self.out.json("axioms.json", &report)?;
        for c in &report.checks {
            self.verdict(c.name, c.pass, format!("worst {:.3e} over {} cases, tolerance {:e}", c.worst, c.cases, c.tolerance));
        }
        Ok(())
    }

    fn feller_report(&mut self, m: MethodBlock, t: f64, deltas: &[f64], tolerance: f64) -> CliResult<()> {
        self.margin_note(t);
        let sg = self.semigroup(&m)?;
        let report = sg.feller_modulus(&self.psi, t, deltas)?;
        self.out.modulus("modulus", &report)?;
        self.verdict(
            "modulus vanishes as delta shrinks",
            report.monotone,
            format!("omega {:?}, extrapolated omega(0) {:.3e}", report.omega, report.omega_zero),
        );
        if let Some(reference) = &report.reference {
            let dev = report.omega.iter().zip(reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            self.verdict("closed-form modulus", dev <= tolerance, format!("deviation {dev:.3e}, tolerance {tolerance:e}"));
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn mc_lower_bound(
        &mut self,
        x: &[f64],
        t: f64,
        n_paths: usize,
        n_steps: usize,
        set: PolicySet,
        compare_dp: bool,
        tolerance: f64,
    ) -> CliResult<()> {
        let x = self.point(x)?;
        let mut policies = match set {
            PolicySet::Mesh => constant_policies(&self.mesh),
            PolicySet::Vertices | PolicySet::Feedback => vertex_policies(self.model.controls(), &self.mesh),
        };
        let mut dp_value = None;
        let mut dp_steps = None;
        if compare_dp || set == PolicySet::Feedback {
            let rule = QuadratureRule::gauss_hermite(self.model.dim(), dp::DEFAULT_ORDER)?;
            let solver = DpSolver::new(&self.model, &self.mesh, self.grid.lattice(), rule)?;
            let n_dp = dp::steps_for(t, dp::default_step(solver.lattice()));
            let (v, table) = solver.solve_with_policy(&ValueGrid::sample(solver.lattice(), &self.psi), t, n_dp)?;
            if compare_dp {
                dp_value = Some(v.interpolate(&x));
            }
            dp_steps = Some(n_dp);
            if set == PolicySet::Feedback {
                policies.push(Policy::Feedback(table));
            }
        }
        let seed = self.cfg.seed;
        let lb = lower_bound(&self.model, &self.mesh, &self.psi, &x, t, &policies, n_paths, n_steps, seed)?;
        let best = &policies[lb.best_policy];
        self.out.json(
            "ensemble.json",
            &EnsembleSummary { x: x.clone(), t, policy: best.describe(), n_paths, mean: lb.value, se: lb.se, seed },
        )?;
        let pass = dp_value.map_or(true, |dp| lb.value - 3.0 * lb.se <= dp + tolerance);
        let report = LowerBoundReport {
            x,
            t,
            n_paths,
            n_steps,
            seed,
            best: lb.best_policy,
            value: lb.value,
            se: lb.se,
            dp_value,
            dp_steps,
            tolerance,
            pass,
            policies: policies
                .iter()
                .zip(&lb.estimates)
                .map(|(p, e)| PolicyEstimate { policy: p.describe(), mean: e.mean, se: e.se })
                .collect(),
        };
        self.out.json("policies.json", &report)?;
        self.note(format!("lower bound {} ± {} from {}", lb.value, lb.se, best.describe()));
        if let Some(dp) = dp_value {
            self.verdict(
                "no policy beats the DP value",
                pass,
                format!("bound - 3 SE = {:.5}, DP {dp:.5}, tolerance {tolerance:e}", lb.value - 3.0 * lb.se),
            );
        }
        Ok(())
    }

    fn girsanov_check(&mut self, x: &[f64], t: f64, n_paths: usize, n_steps: usize, control: usize) -> CliResult<()> {
        let x = self.point(x)?;
        if control >= self.mesh.len() {
            return Err(CliError::config(
                "command.control",
                format!("control index {control} is outside the mesh of {} points", self.mesh.len()),
            ));
        }
        let policy = Policy::Constant(control);
        let r = verify_bounds(&self.model, &self.mesh, &policy, &x, t, n_paths, n_steps, self.cfg.seed)?;
        self.out.json("girsanov.json", &r)?;
        self.note(format!("energy C = {}, bound e^(Ct) = {}", r.energy, r.bound));
        self.verdict(
            "martingale",
            r.martingale == Verdict::Pass,
            format!("E[Z] = {:.5} ± {:.2e}", r.z.mean, r.z.se),
        );
        self.verdict(
            "second moment",
            r.second_moment == Verdict::Pass,
            format!("E[Z^2] = {:.5} ± {:.2e}", r.z_squared.mean, r.z_squared.se),
        );
        self.verdict(
            "L1 distance",
            r.l1_bound == Verdict::Pass,
            format!("E|1 - Z| = {:.5} ± {:.2e}", r.abs_deviation.mean, r.abs_deviation.se),
        );
        let profile_ok = r.profile.iter().all(|p| p.pass);
        self.verdict("mean profile", profile_ok, format!("{} checkpoints", r.profile.len()));
        Ok(())
    }

    fn residual_study(&mut self, times: &[f64], tolerance: Option<f64>) -> CliResult<()> {
        let level = |grid: &GridSpec| -> CliResult<(ResidualLevel, Option<ValueGrid>)> {
            let scheme = ExplicitScheme::new(&self.model, &self.mesh, grid.clone())?;
            let u0 = ValueGrid::sample(scheme.lattice(), &self.psi);
            let slices = scheme.solve_slices(&u0, times)?;
            let r = residual(&scheme, &slices)?;
            let middle = r.fields.get(r.fields.len() / 2).cloned();
            let level = ResidualLevel {
                dx: grid.lattice().dx().to_vec(),
                dt: grid.dt(),
                interior_sup: r.interior_sup,
                interior_mean: r.interior_mean,
            };
            Ok((level, middle))
        };
        let (base, field) = level(&self.grid)?;
        let (refined, _) = level(&self.grid.refined()?)?;
        if let Some(field) = field {
            let sg = Semigroup::new(&self.model, &self.mesh, &self.grid, Method::Pde)?;
            let meta = self.grid_meta(field.time(), &sg);
            self.out.grid("residual", &field, &meta)?;
        }
        let ratio = if refined.interior_sup > 0.0 { base.interior_sup / refined.interior_sup } else { f64::INFINITY };
        let decreasing = refined.interior_sup <= base.interior_sup;
        let within = tolerance.map_or(true, |tol| refined.interior_sup <= tol);
        let pass = decreasing && within;
        self.verdict(
            "residual decreases under refinement",
            decreasing,
            format!("sup {:.3e} -> {:.3e}, ratio {ratio:.2}", base.interior_sup, refined.interior_sup),
        );
        if let Some(tol) = tolerance {
            self.verdict("refined residual", within, format!("sup {:.3e}, tolerance {tol:e}", refined.interior_sup));
        }
        self.out.json("residual.json", &ResidualStudy { times: times.to_vec(), base, refined, ratio, tolerance, pass })?;
        Ok(())
    }
}
