//! Multistart benchmark runner with per-instance persistence and resume.
//!
//! Every (problem, uncertainty level, solver, start) combination is one
//! independent instance. Instances run in parallel; results are written as
//! one CSV per instance plus a manifest that records the configuration hash,
//! so an interrupted run picks up where it left off as long as the
//! configuration is unchanged.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::frontier::FrontierPoint;
use crate::constants;
use crate::error::Error;
use crate::problem::{BoxDomain, CompositeProblem};
use crate::registry;
use crate::robust::{self, Anchor, DeltaBar, RobustConfig};
use crate::solver::{
    self, ArmijoParams, SolverOptions, SolverTrace, StepRule, StopReason,
};
use crate::Result;

/// Uniform starting points from a seeded generator.
pub fn generate_starts(domain: &BoxDomain, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            domain
                .lower()
                .iter()
                .zip(domain.upper())
                .map(|(&l, &u)| if l == u { l } else { rng.gen_range(l..u) })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Condg,
    Proxgrad,
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverKind::Condg => write!(f, "condg"),
            SolverKind::Proxgrad => write!(f, "proxgrad"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepRuleSpec {
    Armijo,
    Adaptive,
    Diminishing,
}

impl Default for StepRuleSpec {
    fn default() -> Self {
        StepRuleSpec::Armijo
    }
}

/// Algorithmic parameters shared by all instances of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchParams {
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    #[serde(default = "default_omega1")]
    pub omega1: f64,
    #[serde(default = "default_omega2")]
    pub omega2: f64,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_zeta() -> f64 {
    1e-4
}
fn default_omega1() -> f64 {
    0.05
}
fn default_omega2() -> f64 {
    0.95
}
fn default_mu() -> f64 {
    1.0
}
fn default_max_iter() -> usize {
    solver::DEFAULT_MAX_ITER
}

impl Default for BenchParams {
    fn default() -> Self {
        BenchParams {
            zeta: default_zeta(),
            omega1: default_omega1(),
            omega2: default_omega2(),
            mu: default_mu(),
            max_iter: default_max_iter(),
        }
    }
}

impl BenchParams {
    pub fn armijo(&self) -> ArmijoParams {
        ArmijoParams {
            zeta: self.zeta,
            omega1: self.omega1,
            omega2: self.omega2,
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            max_iter: self.max_iter,
            stop_mu: self.mu,
            ..SolverOptions::default()
        }
    }
}

/// Budgets for the frontier-collection mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Budgets {
    #[serde(default = "default_frontier_seconds")]
    pub frontier_seconds: f64,
    #[serde(default = "default_frontier_starts")]
    pub frontier_max_starts: usize,
}

fn default_frontier_seconds() -> f64 {
    10.0
}
fn default_frontier_starts() -> usize {
    50
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            frontier_seconds: default_frontier_seconds(),
            frontier_max_starts: default_frontier_starts(),
        }
    }
}

/// Full benchmark configuration (the JSON schema of `--config`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchConfig {
    pub problems: Vec<String>,
    pub solvers: Vec<SolverKind>,
    #[serde(default)]
    pub step_rule: StepRuleSpec,
    #[serde(default)]
    pub params: BenchParams,
    pub starts: usize,
    pub seed: u64,
    #[serde(default = "default_delta_bars")]
    pub delta_bar: Vec<DeltaBar>,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub jobs: Option<usize>,
    /// Redraw the random delta-bar per start instead of once per problem.
    #[serde(default)]
    pub redraw_delta_per_start: bool,
    /// Run on the plain problems instead of their robust counterparts.
    #[serde(default)]
    pub plain: bool,
}

fn default_delta_bars() -> Vec<DeltaBar> {
    vec![DeltaBar::random()]
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.problems.is_empty() || self.solvers.is_empty() {
            return Err(Error::InvalidConfig(
                "need at least one problem and one solver".into(),
            ));
        }
        if self.starts == 0 {
            return Err(Error::InvalidConfig("starts must be at least 1".into()));
        }
        if self.delta_bar.is_empty() {
            return Err(Error::InvalidConfig("delta_bar list must not be empty".into()));
        }
        for p in &self.problems {
            registry::lookup(p)?;
        }
        Ok(())
    }

    /// Stable fingerprint used by the resume logic.
    pub fn fingerprint(&self) -> u64 {
        let json = serde_json::to_string(self).expect("config serializes");
        constants::name_seed(&json)
    }
}

/// Outcome of one instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceResult {
    pub id: usize,
    pub problem: String,
    pub solver: SolverKind,
    pub delta_index: usize,
    pub start_index: usize,
    pub success: bool,
    pub stop_reason: String,
    pub stop_detail: String,
    pub iterations: usize,
    pub f_evals: usize,
    pub grad_evals: usize,
    pub lp_solves: usize,
    pub qp_solves: usize,
    pub final_theta_pg: Option<f64>,
    pub final_f: Vec<f64>,
    pub wall_seconds: f64,
}

/// Everything a finished (or resumed) benchmark knows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub config: BenchConfig,
    pub prng_version: String,
    pub config_fingerprint: u64,
    pub instances: Vec<InstanceResult>,
}

impl BenchmarkResult {
    pub fn success_rate(&self, solver: SolverKind) -> f64 {
        let of_solver: Vec<_> = self
            .instances
            .iter()
            .filter(|i| i.solver == solver)
            .collect();
        if of_solver.is_empty() {
            return 0.0;
        }
        of_solver.iter().filter(|i| i.success).count() as f64 / of_solver.len() as f64
    }

    /// Cost matrix for performance profiles over the chosen measure;
    /// failures are `None`.
    pub fn cost_matrix(&self, measure: CostMeasure) -> (Vec<Vec<Option<f64>>>, Vec<String>) {
        let solvers: Vec<SolverKind> = self.config.solvers.clone();
        let names: Vec<String> = solvers.iter().map(|s| s.to_string()).collect();
        let mut keys: Vec<(String, usize, usize)> = self
            .instances
            .iter()
            .map(|i| (i.problem.clone(), i.delta_index, i.start_index))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        keys.sort();
        let mut matrix = vec![vec![None; solvers.len()]; keys.len()];
        for inst in &self.instances {
            let row = keys
                .binary_search(&(inst.problem.clone(), inst.delta_index, inst.start_index))
                .expect("instance key present");
            let col = solvers
                .iter()
                .position(|s| *s == inst.solver)
                .expect("solver listed in config");
            if inst.success {
                let cost = match measure {
                    CostMeasure::Iterations => (inst.iterations.max(1)) as f64,
                    CostMeasure::FEvals => (inst.f_evals.max(1)) as f64,
                    CostMeasure::WallSeconds => inst.wall_seconds.max(1e-9),
                };
                matrix[row][col] = Some(cost);
            }
        }
        (matrix, names)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostMeasure {
    Iterations,
    FEvals,
    WallSeconds,
}

struct InstanceSpec {
    id: usize,
    problem_index: usize,
    delta_index: usize,
    solver: SolverKind,
    start_index: usize,
}

/// Robust configuration for one (problem, delta level, start) triple.
///
/// The matrices depend only on the seed and problem, never on the delta
/// level, so frontiers at different uncertainty levels share their sets up
/// to scaling (which is what makes them comparable pointwise).
fn robust_config(config: &BenchConfig, problem: &str, delta: &DeltaBar, start: usize) -> RobustConfig {
    let mut seed = config.seed ^ constants::name_seed(problem);
    if config.redraw_delta_per_start {
        seed ^= (start as u64).wrapping_mul(0x9E3779B97F4A7C15);
    }
    RobustConfig {
        seed,
        delta_bar: delta.clone(),
        anchor: Anchor::BoxMidpoint,
    }
}

fn build_problem(
    config: &BenchConfig,
    name: &str,
    delta: &DeltaBar,
    start: usize,
) -> Result<CompositeProblem> {
    let base = registry::lookup(name)?.instantiate()?;
    if config.plain {
        return Ok(base);
    }
    robust::robustify_with(&base, &robust_config(config, name, delta, start))
}

fn run_instance(
    config: &BenchConfig,
    problem: &CompositeProblem,
    solver: SolverKind,
    x0: &[f64],
) -> Result<SolverTrace> {
    let opts = config.params.solver_options();
    match solver {
        SolverKind::Condg => {
            let rule = match config.step_rule {
                StepRuleSpec::Armijo => StepRule::Armijo(config.params.armijo()),
                StepRuleSpec::Adaptive => StepRule::Adaptive {
                    lipschitz: problem
                        .smooth()
                        .max_lipschitz()
                        .ok_or_else(|| Error::InvalidConfig("adaptive rule needs L".into()))?,
                },
                StepRuleSpec::Diminishing => StepRule::Diminishing,
            };
            solver::run_condg(problem, x0, &rule, &opts)
        }
        SolverKind::Proxgrad => {
            solver::run_proxgrad(problem, x0, config.params.mu, &config.params.armijo(), &opts)
        }
    }
}

fn to_result(id: usize, spec: &InstanceSpec, config: &BenchConfig, trace: &SolverTrace) -> InstanceResult {
    InstanceResult {
        id,
        problem: config.problems[spec.problem_index].clone(),
        solver: spec.solver,
        delta_index: spec.delta_index,
        start_index: spec.start_index,
        success: matches!(
            trace.stop_reason,
            StopReason::Converged | StopReason::CriticalAtStart
        ),
        stop_reason: format!("{:?}", trace.stop_reason),
        stop_detail: trace.stop_detail.clone(),
        iterations: trace.iterations(),
        f_evals: trace.counters.f_evals,
        grad_evals: trace.counters.grad_evals,
        lp_solves: trace.counters.lp_solves,
        qp_solves: trace.counters.qp_solves,
        final_theta_pg: trace.final_theta_pg,
        final_f: trace.final_f.clone(),
        wall_seconds: trace.wall_seconds,
    }
}

/// Run (or resume) a benchmark. When `out_dir` is given, the manifest goes
/// to `<out_dir>/manifest.json` and per-instance traces to
/// `<out_dir>/instances/<id>.csv`.
pub fn run_benchmark(config: &BenchConfig, out_dir: Option<&Path>) -> Result<BenchmarkResult> {
    config.validate()?;
    let fingerprint = config.fingerprint();

    // Resume: collect already-finished instance ids from a matching manifest.
    let mut done: Vec<InstanceResult> = Vec::new();
    if let Some(dir) = out_dir {
        let manifest = dir.join("manifest.json");
        if manifest.exists() {
            let text = std::fs::read_to_string(&manifest)?;
            if let Ok(prev) = serde_json::from_str::<BenchmarkResult>(&text) {
                if prev.config_fingerprint == fingerprint {
                    done = prev.instances;
                }
            }
        }
        std::fs::create_dir_all(dir.join("instances"))?;
    }
    let done_ids: BTreeSet<usize> = done.iter().map(|i| i.id).collect();

    // Build the problem and start grids once.
    let mut problems: Vec<Vec<CompositeProblem>> = Vec::new(); // [problem][delta]
    let mut starts: Vec<Vec<Vec<f64>>> = Vec::new();
    for name in &config.problems {
        let base = registry::lookup(name)?.instantiate()?;
        starts.push(generate_starts(
            base.domain(),
            config.starts,
            config.seed ^ constants::name_seed(name) ^ 0x5747,
        ));
        let mut per_delta = Vec::new();
        for delta in &config.delta_bar {
            per_delta.push(build_problem(config, name, delta, 0)?);
        }
        problems.push(per_delta);
    }

    let mut specs = Vec::new();
    let mut id = 0usize;
    for (pi, _) in config.problems.iter().enumerate() {
        for (di, _) in config.delta_bar.iter().enumerate() {
            for &solver in &config.solvers {
                for si in 0..config.starts {
                    specs.push(InstanceSpec {
                        id,
                        problem_index: pi,
                        delta_index: di,
                        solver,
                        start_index: si,
                    });
                    id += 1;
                }
            }
        }
    }

    let pending: Vec<&InstanceSpec> = specs.iter().filter(|s| !done_ids.contains(&s.id)).collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::numerical("benchmark pool", e.to_string()))?;

    let mut results = done;
    // Chunked execution so the manifest stays fresh for resume.
    for chunk in pending.chunks(64) {
        let batch: Vec<(usize, Result<SolverTrace>)> = pool.install(|| {
            chunk
                .par_iter()
                .map(|spec| {
                    let problem = if config.redraw_delta_per_start {
                        match build_problem(
                            config,
                            &config.problems[spec.problem_index],
                            &config.delta_bar[spec.delta_index],
                            spec.start_index,
                        ) {
                            Ok(p) => p,
                            Err(e) => return (spec.id, Err(e)),
                        }
                    } else {
                        problems[spec.problem_index][spec.delta_index].clone()
                    };
                    let x0 = &starts[spec.problem_index][spec.start_index];
                    (spec.id, run_instance(config, &problem, spec.solver, x0))
                })
                .collect()
        });
        for ((iid, trace), spec) in batch.into_iter().zip(chunk) {
            let inst = match trace {
                Ok(trace) => {
                    if let Some(dir) = out_dir {
                        let path = dir.join("instances").join(format!("{iid:05}.csv"));
                        std::fs::write(path, trace.to_csv())?;
                    }
                    to_result(iid, spec, config, &trace)
                }
                Err(e) => InstanceResult {
                    id: iid,
                    problem: config.problems[spec.problem_index].clone(),
                    solver: spec.solver,
                    delta_index: spec.delta_index,
                    start_index: spec.start_index,
                    success: false,
                    stop_reason: "NumericalFailure".into(),
                    stop_detail: e.to_string(),
                    iterations: 0,
                    f_evals: 0,
                    grad_evals: 0,
                    lp_solves: 0,
                    qp_solves: 0,
                    final_theta_pg: None,
                    final_f: vec![],
                    wall_seconds: 0.0,
                },
            };
            results.push(inst);
        }
        if let Some(dir) = out_dir {
            results.sort_by_key(|i| i.id);
            let partial = BenchmarkResult {
                config: config.clone(),
                prng_version: robust::PRNG_VERSION.to_string(),
                config_fingerprint: fingerprint,
                instances: results.clone(),
            };
            std::fs::write(
                dir.join("manifest.json"),
                serde_json::to_string_pretty(&partial)?,
            )?;
        }
    }
    results.sort_by_key(|i| i.id);
    let result = BenchmarkResult {
        config: config.clone(),
        prng_version: robust::PRNG_VERSION.to_string(),
        config_fingerprint: fingerprint,
        instances: results,
    };
    if let Some(dir) = out_dir {
        std::fs::write(
            dir.join("manifest.json"),
            serde_json::to_string_pretty(&result)?,
        )?;
    }
    Ok(result)
}

/// Frontier-collection mode: run starts until the time or start budget is
/// exhausted and keep the objective vectors of successful runs.
pub fn collect_frontier(
    config: &BenchConfig,
    problem: &CompositeProblem,
    solver: SolverKind,
    starts: &[Vec<f64>],
) -> Result<Vec<FrontierPoint>> {
    let deadline = Duration::from_secs_f64(config.budgets.frontier_seconds);
    let began = Instant::now();
    let mut points = Vec::new();
    for (si, x0) in starts
        .iter()
        .enumerate()
        .take(config.budgets.frontier_max_starts)
    {
        if began.elapsed() >= deadline {
            break;
        }
        let trace = run_instance(config, problem, solver, x0)?;
        if matches!(
            trace.stop_reason,
            StopReason::Converged | StopReason::CriticalAtStart
        ) {
            points.push(FrontierPoint {
                values: trace.final_f.clone(),
                solver: solver.to_string(),
                instance: si,
            });
        }
    }
    Ok(points)
}
