//! Benchmark harness: multistart runner, Pareto metrics, performance
//! profiles and report emission.

pub mod frontier;
pub mod profile;
pub mod report;
pub mod runner;

pub use frontier::{
    dominates, objective_extremes, purity, spread_metrics, FrontierApproximation, FrontierPoint,
};
pub use profile::{performance_profiles, ProfileCurve};
pub use runner::{
    collect_frontier, generate_starts, run_benchmark, BenchConfig, BenchParams, BenchmarkResult,
    Budgets, CostMeasure, InstanceResult, SolverKind, StepRuleSpec,
};
