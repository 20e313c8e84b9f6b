//! `mocg` — conditional gradient solvers for multiobjective composite
//! problems, with a robust-optimization benchmark harness.
//!
//! Exit codes: 0 on success, 1 on solver failure, 2 on usage errors.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mocg::bench::{
    self, collect_frontier, generate_starts, objective_extremes, purity, run_benchmark,
    spread_metrics, BenchConfig, BenchParams, BenchmarkResult, Budgets, FrontierApproximation,
    SolverKind, StepRuleSpec,
};
use mocg::constants::{estimate_constants, ConstantsEstimate};
use mocg::problem::CompositeProblem;
use mocg::registry;
use mocg::robust::{self, Anchor, DeltaBar, RobustConfig};
use mocg::solver::{self, ArmijoParams, SolverOptions, SolverTrace, StepRule};

#[derive(Parser)]
#[command(name = "mocg", version, about = "Conditional gradient methods for multiobjective composite optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem from one seeded starting point and write the trace.
    Solve(SolveArgs),
    /// Run a multistart benchmark and emit reports.
    Bench(BenchArgs),
    /// Collect Pareto-frontier approximations across uncertainty levels.
    Frontier(FrontierArgs),
    /// Print the estimated problem constants as JSON.
    Constants(ConstantsArgs),
    /// Regenerate report files from benchmark results.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RuleArg {
    Armijo,
    Adaptive,
    Diminishing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverArg {
    Condg,
    Proxgrad,
}

impl From<SolverArg> for SolverKind {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Condg => SolverKind::Condg,
            SolverArg::Proxgrad => SolverKind::Proxgrad,
        }
    }
}

/// Parameters shared by several subcommands.
#[derive(Args, Debug, Clone)]
struct AlgoArgs {
    /// Step-size rule for the conditional gradient method.
    #[arg(long, value_enum, default_value_t = RuleArg::Armijo)]
    rule: RuleArg,
    /// Armijo sufficient-decrease parameter.
    #[arg(long, default_value_t = 1e-4)]
    zeta: f64,
    /// Lower backtracking safeguard.
    #[arg(long, default_value_t = 0.05)]
    omega1: f64,
    /// Upper backtracking safeguard.
    #[arg(long, default_value_t = 0.95)]
    omega2: f64,
    /// Proximity weight of the proximal-gradient subproblem.
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    /// Iteration cap per run.
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
}

impl AlgoArgs {
    fn armijo(&self) -> ArmijoParams {
        ArmijoParams {
            zeta: self.zeta,
            omega1: self.omega1,
            omega2: self.omega2,
        }
    }

    fn options(&self) -> SolverOptions {
        SolverOptions {
            max_iter: self.max_iter,
            stop_mu: self.mu,
            ..SolverOptions::default()
        }
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Registry problem name.
    #[arg(long)]
    problem: String,
    /// Dimension override for scalable problems.
    #[arg(long)]
    n: Option<usize>,
    /// Attach the robust support-function term.
    #[arg(long)]
    robust: bool,
    /// Uncertainty scale: a number in [0.02, 0.10] or `random`.
    #[arg(long, default_value = "random")]
    delta_bar: String,
    /// Seed controlling every random draw of the run.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Which method to run.
    #[arg(long, value_enum, default_value_t = SolverArg::Condg)]
    solver: SolverArg,
    #[command(flatten)]
    algo: AlgoArgs,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Benchmark configuration file (JSON); flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated problem names.
    #[arg(long, value_delimiter = ',')]
    problems: Vec<String>,
    /// Solvers to compare.
    #[arg(long, value_enum, value_delimiter = ',')]
    solvers: Vec<SolverArg>,
    /// Starting points per problem.
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Uncertainty scales (numbers or `random`), one benchmark layer each.
    #[arg(long, value_delimiter = ',')]
    delta_bar: Vec<String>,
    /// Worker threads for instance execution.
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    algo: AlgoArgs,
    /// Output directory (manifest, instance traces, report).
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct FrontierArgs {
    /// Comma-separated problem names.
    #[arg(long, value_delimiter = ',', default_values_t = ["BK1".to_string(), "IM1".to_string(), "VU2".to_string()])]
    problems: Vec<String>,
    /// Uncertainty scales, one scatter layer each.
    #[arg(long, value_delimiter = ',', default_values_t = [0.02, 0.05, 0.10])]
    delta_bars: Vec<f64>,
    /// Starting points per (problem, level, solver).
    #[arg(long, default_value_t = 200)]
    starts: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Solvers whose frontiers are collected (two enable the metrics).
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [SolverArg::Condg])]
    solvers: Vec<SolverArg>,
    /// Wall-clock budget per (problem, level, solver) in seconds.
    #[arg(long, default_value_t = 120.0)]
    budget_seconds: f64,
    #[command(flatten)]
    algo: AlgoArgs,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value = "report")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ConstantsArgs {
    #[arg(long)]
    problem: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    robust: bool,
    #[arg(long, default_value = "random")]
    delta_bar: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    zeta: f64,
    #[arg(long, default_value_t = 0.05)]
    omega1: f64,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Directory holding a benchmark `manifest.json`.
    #[arg(long, default_value = "results")]
    results: PathBuf,
    #[arg(long, default_value = "report")]
    out: PathBuf,
}

fn parse_delta_bar(s: &str) -> anyhow::Result<DeltaBar> {
    if s.eq_ignore_ascii_case("random") {
        Ok(DeltaBar::random())
    } else {
        let v: f64 = s
            .parse()
            .with_context(|| format!("delta_bar `{s}` is neither a number nor `random`"))?;
        Ok(DeltaBar::Fixed(v))
    }
}

fn build_problem(
    name: &str,
    n: Option<usize>,
    robust: bool,
    delta_bar: &DeltaBar,
    seed: u64,
) -> anyhow::Result<CompositeProblem> {
    let factory = registry::lookup(name)?;
    let base = match n {
        Some(n) => factory.instantiate_n(n)?,
        None => factory.instantiate()?,
    };
    if !robust {
        return Ok(base);
    }
    let cfg = RobustConfig {
        seed,
        delta_bar: delta_bar.clone(),
        anchor: Anchor::BoxMidpoint,
    };
    Ok(robust::robustify_with(&base, &cfg)?)
}

#[derive(Serialize)]
struct RunDocument<'a> {
    problem: String,
    solver: String,
    rule: String,
    seed: u64,
    robust: bool,
    delta_bar: &'a DeltaBar,
    prng_version: &'static str,
    constants: &'a ConstantsEstimate,
    solver_version: &'static str,
    trace: &'a SolverTrace,
    metadata: BTreeMap<String, String>,
}

fn cmd_solve(args: &SolveArgs) -> anyhow::Result<()> {
    let delta_bar = parse_delta_bar(&args.delta_bar)?;
    let problem = build_problem(
        &args.problem,
        args.n,
        args.robust,
        &delta_bar,
        args.seed,
    )?;
    let x0 = generate_starts(problem.domain(), 1, args.seed ^ 0x5747)
        .pop()
        .expect("one start");
    let opts = args.algo.options();
    let trace = match args.solver {
        SolverArg::Proxgrad => solver::run_proxgrad(
            &problem,
            &x0,
            args.algo.mu,
            &args.algo.armijo(),
            &opts,
        )?,
        SolverArg::Condg => {
            let rule = match args.algo.rule {
                RuleArg::Armijo => StepRule::Armijo(args.algo.armijo()),
                RuleArg::Adaptive => StepRule::Adaptive {
                    lipschitz: problem
                        .smooth()
                        .max_lipschitz()
                        .context("adaptive rule needs a Lipschitz constant")?,
                },
                RuleArg::Diminishing => StepRule::Diminishing,
            };
            solver::run_condg(&problem, &x0, &rule, &opts)?
        }
    };
    std::fs::create_dir_all(&args.out)?;
    std::fs::write(args.out.join("trace.csv"), trace.to_csv())?;
    let constants = estimate_constants(&problem, args.algo.zeta, args.algo.omega1);
    let mut metadata = BTreeMap::new();
    metadata.insert(
        "timestamp_unix".to_string(),
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs().to_string())
            .unwrap_or_default(),
    );
    let doc = RunDocument {
        problem: args.problem.clone(),
        solver: format!("{:?}", args.solver).to_lowercase(),
        rule: format!("{:?}", args.algo.rule).to_lowercase(),
        seed: args.seed,
        robust: args.robust,
        delta_bar: &delta_bar,
        prng_version: robust::PRNG_VERSION,
        constants: &constants,
        solver_version: env!("CARGO_PKG_VERSION"),
        trace: &trace,
        metadata,
    };
    std::fs::write(args.out.join("run.json"), serde_json::to_string_pretty(&doc)?)?;
    let theta_pg = trace
        .final_theta_pg
        .map(|t| format!("{:.3e}", t.abs()))
        .unwrap_or_else(|| "n/a".into());
    println!(
        "{} {} on {}: {:?} after {} iterations, final |theta_PG| = {}, F = {:?}",
        doc.solver,
        doc.rule,
        args.problem,
        trace.stop_reason,
        trace.iterations(),
        theta_pg,
        trace.final_f,
    );
    if trace.stop_reason == solver::StopReason::NumericalFailure {
        bail!("solver reported a numerical failure");
    }
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> anyhow::Result<()> {
    let mut config: BenchConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => BenchConfig {
            problems: vec![],
            solvers: vec![SolverKind::Condg, SolverKind::Proxgrad],
            step_rule: StepRuleSpec::Armijo,
            params: BenchParams::default(),
            starts: 100,
            seed: 1,
            delta_bar: vec![DeltaBar::random()],
            budgets: Budgets::default(),
            jobs: None,
            redraw_delta_per_start: false,
            plain: false,
        },
    };
    // Explicit flags win over the config file.
    if !args.problems.is_empty() {
        config.problems = args.problems.clone();
    }
    if !args.solvers.is_empty() {
        config.solvers = args.solvers.iter().map(|&s| s.into()).collect();
    }
    if let Some(s) = args.starts {
        config.starts = s;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if !args.delta_bar.is_empty() {
        config.delta_bar = args
            .delta_bar
            .iter()
            .map(|s| parse_delta_bar(s))
            .collect::<anyhow::Result<_>>()?;
    }
    if args.jobs.is_some() {
        config.jobs = args.jobs;
    }
    config.params = BenchParams {
        zeta: args.algo.zeta,
        omega1: args.algo.omega1,
        omega2: args.algo.omega2,
        mu: args.algo.mu,
        max_iter: args.algo.max_iter,
    };
    config.step_rule = match args.algo.rule {
        RuleArg::Armijo => StepRuleSpec::Armijo,
        RuleArg::Adaptive => StepRuleSpec::Adaptive,
        RuleArg::Diminishing => StepRuleSpec::Diminishing,
    };
    if config.problems.is_empty() {
        bail!("no problems given (use --problems or --config)");
    }
    let result = run_benchmark(&config, Some(&args.out))?;
    bench::report::emit_report(&result, &args.out.join("report"))?;
    for &s in &config.solvers {
        println!(
            "{s}: {:.1}% success over {} instances",
            100.0 * result.success_rate(s),
            result.instances.iter().filter(|i| i.solver == s).count()
        );
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_frontier(args: &FrontierArgs) -> anyhow::Result<()> {
    std::fs::create_dir_all(&args.out)?;
    let solvers: Vec<SolverKind> = args.solvers.iter().map(|&s| s.into()).collect();
    let config = BenchConfig {
        problems: args.problems.clone(),
        solvers: solvers.clone(),
        step_rule: match args.algo.rule {
            RuleArg::Armijo => StepRuleSpec::Armijo,
            RuleArg::Adaptive => StepRuleSpec::Adaptive,
            RuleArg::Diminishing => StepRuleSpec::Diminishing,
        },
        params: BenchParams {
            zeta: args.algo.zeta,
            omega1: args.algo.omega1,
            omega2: args.algo.omega2,
            mu: args.algo.mu,
            max_iter: args.algo.max_iter,
        },
        starts: args.starts,
        seed: args.seed,
        delta_bar: args.delta_bars.iter().map(|&v| DeltaBar::Fixed(v)).collect(),
        budgets: Budgets {
            frontier_seconds: args.budget_seconds,
            frontier_max_starts: args.starts,
        },
        jobs: args.jobs,
        redraw_delta_per_start: false,
        plain: false,
    };
    config.validate()?;

    #[derive(Serialize)]
    struct FrontierMetrics {
        problem: String,
        delta_bar: f64,
        solver: String,
        points: usize,
        purity: Option<f64>,
        spread_gamma: Option<f64>,
        spread_delta: Option<f64>,
    }
    let mut all_metrics = Vec::new();

    for name in &args.problems {
        let base = registry::lookup(name)?.instantiate()?;
        let starts = generate_starts(
            base.domain(),
            args.starts,
            args.seed ^ mocg::constants::name_seed(name) ^ 0x5747,
        );
        let mut layers = Vec::new();
        for &db in &args.delta_bars {
            let cfg = RobustConfig {
                seed: args.seed ^ mocg::constants::name_seed(name),
                delta_bar: DeltaBar::Fixed(db),
                anchor: Anchor::BoxMidpoint,
            };
            let problem = robust::robustify_with(&base, &cfg)?;
            let mut per_solver = BTreeMap::new();
            for &kind in &solvers {
                let pts = collect_frontier(&config, &problem, kind, &starts)?;
                per_solver.insert(kind.to_string(), FrontierApproximation::from_points(pts));
            }
            // Combined layer for the scatter plot.
            let combined: Vec<_> = per_solver
                .values()
                .flat_map(|f| f.points().to_vec())
                .collect();
            let combined = FrontierApproximation::from_points(combined);
            layers.push((format!("delta_bar={db}"), combined.points().to_vec()));

            let purities = if per_solver.len() >= 2 {
                purity(&per_solver)?
            } else {
                BTreeMap::new()
            };
            let union: Vec<&[f64]> = per_solver
                .values()
                .flat_map(|f| f.points())
                .map(|p| p.values.as_slice())
                .collect();
            let m = base.num_objectives();
            let (lo, hi) = objective_extremes(union.into_iter(), m);
            for (solver_name, frontier) in &per_solver {
                let spread = if frontier.len() >= 2 {
                    let vals: Vec<Vec<f64>> =
                        frontier.points().iter().map(|p| p.values.clone()).collect();
                    spread_metrics(&vals, &lo, &hi).ok()
                } else {
                    None
                };
                all_metrics.push(FrontierMetrics {
                    problem: name.clone(),
                    delta_bar: db,
                    solver: solver_name.clone(),
                    points: frontier.len(),
                    purity: purities.get(solver_name).copied().flatten(),
                    spread_gamma: spread.map(|s| s.0),
                    spread_delta: spread.map(|s| s.1),
                });
            }
        }
        let svg = bench::report::frontier_scatter_svg(&layers, &format!("{name} fronts"));
        std::fs::write(args.out.join(format!("frontier_{name}.svg")), svg)?;
    }
    std::fs::write(
        args.out.join("frontier_metrics.json"),
        serde_json::to_string_pretty(&all_metrics)?,
    )?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_constants(args: &ConstantsArgs) -> anyhow::Result<()> {
    let delta_bar = parse_delta_bar(&args.delta_bar)?;
    let problem = build_problem(&args.problem, args.n, args.robust, &delta_bar, args.seed)?;
    let constants = estimate_constants(&problem, args.zeta, args.omega1);
    println!("{}", serde_json::to_string_pretty(&constants)?);
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> anyhow::Result<()> {
    let manifest = args.results.join("manifest.json");
    let text = std::fs::read_to_string(&manifest)
        .with_context(|| format!("reading {}", manifest.display()))?;
    let result: BenchmarkResult = serde_json::from_str(&text)?;
    bench::report::emit_report(&result, &args.out)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Frontier(a) => cmd_frontier(a),
        Command::Constants(a) => cmd_constants(a),
        Command::Report(a) => cmd_report(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
