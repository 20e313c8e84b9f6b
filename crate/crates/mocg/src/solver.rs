//! The generalized conditional gradient method and its proximal-gradient
//! comparator.
//!
//! One iteration computes the direction subproblem at `x_k` (LP for the
//! conditional gradient, QP for the proximal gradient), stops if the gap
//! value is numerically zero, otherwise picks a step size
//! `lambda_k in (0, 1]` and moves to `x_{k+1} = x_k + lambda_k (p(x_k) - x_k)`,
//! which stays in the box because it is a convex combination of box points.
//!
//! Step-size rules:
//!
//! * Armijo — backtracking on the vector sufficient-decrease condition
//!   `F(x + lambda d) <= F(x) - zeta lambda |theta| e` (componentwise), with
//!   safeguarded quadratic interpolation between `omega1 lambda` and
//!   `omega2 lambda`;
//! * adaptive — `lambda = min(1, |theta| / (L |d|^2))` for a known gradient
//!   Lipschitz constant `L`;
//! * diminishing — `lambda_k = 2 / (k + 2)`.
//!
//! Runs stop by the composite test: relative step
//! `|x_k - x_{k-1}|_inf / max(1, |x_{k-1}|_inf) <= 1e-4` *and*
//! `|theta_PG(x_k)| <= 1e-4`. For the conditional gradient the proximal gap
//! is only evaluated once the step test has passed; the comparator has it
//! for free from its own direction subproblem.

use std::time::{Duration, Instant};


use serde::Serialize;

use crate::error::Error;
use crate::gap::{self, GapSolution};
use crate::problem::{CompositeProblem, NonsmoothTerm};
use crate::Result;

pub const DEFAULT_MAX_ITER: usize = 200;
pub const DEFAULT_MU: f64 = 1.0;
pub const REL_STEP_TOL: f64 = 1e-4;
pub const THETA_PG_TOL: f64 = 1e-4;
/// Floating-point zero guard for the gap value in Step 2.
pub const CRITICALITY_EPS: f64 = 1e-12;
const LINE_SEARCH_FLOOR: f64 = 1e-16;

/// Armijo line-search parameters `0 < zeta < 1`, `0 < omega1 < omega2 < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArmijoParams {
    pub zeta: f64,
    pub omega1: f64,
    pub omega2: f64,
}

impl Default for ArmijoParams {
    fn default() -> Self {
        ArmijoParams {
            zeta: 1e-4,
            omega1: 0.05,
            omega2: 0.95,
        }
    }
}

impl ArmijoParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return Err(Error::InvalidConfig(format!("zeta = {} not in (0,1)", self.zeta)));
        }
        if !(self.omega1 > 0.0 && self.omega1 < self.omega2 && self.omega2 < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < omega1 < omega2 < 1, got ({}, {})",
                self.omega1, self.omega2
            )));
        }
        Ok(())
    }
}

/// Step-size strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    Armijo(ArmijoParams),
    Adaptive { lipschitz: f64 },
    Diminishing,
}

impl StepRule {
    fn validate(&self) -> Result<()> {
        match self {
            StepRule::Armijo(p) => p.validate(),
            StepRule::Adaptive { lipschitz } => {
                if !(*lipschitz > 0.0) {
                    Err(Error::InvalidConfig(format!(
                        "adaptive rule needs L > 0, got {lipschitz}"
                    )))
                } else {
                    Ok(())
                }
            }
            StepRule::Diminishing => Ok(()),
        }
    }
}

/// One row of a trace: the iterate, its objective values, the gap value and
/// the accepted step.
#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub k: usize,
    pub x: Vec<f64>,
    pub f: Vec<f64>,
    pub theta: f64,
    pub lambda: f64,
    /// Objective-vector evaluations spent inside the line search (one for
    /// the accepted trial, plus one per backtrack).
    pub inner_evals: usize,
    pub subproblem_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    CriticalAtStart,
    NumericalFailure,
}

/// Work counters for one run.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Counters {
    pub f_evals: usize,
    pub grad_evals: usize,
    pub lp_solves: usize,
    pub qp_solves: usize,
}

/// Full account of one run.
#[derive(Debug, Clone, Serialize)]
pub struct SolverTrace {
    pub records: Vec<IterationRecord>,
    pub stop_reason: StopReason,
    /// Which stopping condition actually fired ("composite_test",
    /// "gap_critical", "iteration_cap", "time_budget", or an error note).
    pub stop_detail: String,
    pub final_x: Vec<f64>,
    pub final_f: Vec<f64>,
    pub final_theta_pg: Option<f64>,
    pub counters: Counters,
    pub wall_seconds: f64,
}

impl SolverTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn converged(&self) -> bool {
        self.stop_reason == StopReason::Converged
    }

    /// CSV rows (`k,lambda,theta,inner_evals,f_1..f_m,x_1..x_n`), without
    /// wall-clock columns so that identical runs produce identical bytes.
    pub fn to_csv(&self) -> String {
        let m = self.final_f.len();
        let n = self.final_x.len();
        let mut out = String::from("k,lambda,theta,inner_evals");
        for j in 0..m {
            out.push_str(&format!(",f_{}", j + 1));
        }
        for i in 0..n {
            out.push_str(&format!(",x_{}", i + 1));
        }
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!("{},{},{},{}", r.k, r.lambda, r.theta, r.inner_evals));
            for v in &r.f {
                out.push_str(&format!(",{v}"));
            }
            for v in &r.x {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Run options shared by both methods.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub max_iter: usize,
    pub time_budget: Option<Duration>,
    pub rel_step_tol: f64,
    pub theta_pg_tol: f64,
    /// Proximity weight used for the stopping-test gap.
    pub stop_mu: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iter: DEFAULT_MAX_ITER,
            time_budget: None,
            rel_step_tol: REL_STEP_TOL,
            theta_pg_tol: THETA_PG_TOL,
            stop_mu: DEFAULT_MU,
        }
    }
}

/// Outcome of the composite stopping test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopDecision {
    Converged { theta_pg: f64 },
    NotYet,
}

/// Composite stopping test: the relative-step criterion short-circuits the
/// (possibly expensive) proximal gap, which is only requested from the
/// provider when the first test passes.
pub fn check_stop(
    x_prev: &[f64],
    x_cur: &[f64],
    rel_tol: f64,
    theta_tol: f64,
    theta_pg: impl FnOnce() -> Result<f64>,
) -> Result<StopDecision> {
    if relative_step(x_prev, x_cur) > rel_tol {
        return Ok(StopDecision::NotYet);
    }
    let t = theta_pg()?;
    if t.abs() <= theta_tol {
        Ok(StopDecision::Converged { theta_pg: t })
    } else {
        Ok(StopDecision::NotYet)
    }
}

pub fn relative_step(x_prev: &[f64], x_cur: &[f64]) -> f64 {
    let num = x_prev
        .iter()
        .zip(x_cur)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let den = x_prev.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1.0);
    num / den
}

/// Adaptive step `lambda = min(1, |theta| / (L |d|^2))`.
pub fn adaptive_step(gap: &GapSolution, lipschitz: f64) -> Result<f64> {
    let norm2: f64 = gap.direction.iter().map(|v| v * v).sum();
    if norm2.sqrt() < 1e-14 {
        if gap.theta < -CRITICALITY_EPS {
            return Err(Error::DegenerateDirection {
                norm: norm2.sqrt(),
                theta: gap.theta,
            });
        }
        return Ok(1.0);
    }
    Ok((gap.theta.abs() / (lipschitz * norm2)).min(1.0))
}

/// Open-loop step `lambda_k = 2 / (k + 2)`.
pub fn diminishing_step(k: usize) -> f64 {
    2.0 / (k as f64 + 2.0)
}

/// Objective values at one point, split into smooth and nonsmooth parts.
#[derive(Debug, Clone)]
struct PointValues {
    f: Vec<f64>,
    g: Vec<f64>,
}

fn eval_point(
    problem: &CompositeProblem,
    x: &[f64],
    counters: &mut Counters,
) -> Result<PointValues> {
    let h = problem.smooth().eval(x);
    counters.f_evals += 1;
    if let NonsmoothTerm::SupportFunction(sets) = problem.nonsmooth() {
        counters.lp_solves += sets.len();
    }
    let g = problem.nonsmooth_values(x)?;
    let f = h.iter().zip(&g).map(|(a, b)| a + b).collect();
    Ok(PointValues { f, g })
}

/// Armijo backtracking line search on the vector sufficient-decrease
/// condition; the caller guarantees `gap.theta < 0`.
///
/// Backtracks fit a quadratic through `phi(0)`, the model slope `theta`
/// (the steepest available surrogate for the directional derivatives of the
/// coordinate functions) and the trial value of the worst-violating
/// objective (lowest index on ties); the minimizer is clamped to
/// `[omega1 lambda, omega2 lambda]`, with the interval midpoint as the
/// fallback for non-finite fits.
pub fn armijo_search(
    problem: &CompositeProblem,
    x: &[f64],
    fx: &[f64],
    gap: &GapSolution,
    params: &ArmijoParams,
) -> Result<(f64, usize)> {
    let mut counters = Counters::default();
    let (lambda, _, inner) = armijo_search_counted(problem, x, fx, gap, params, &mut counters)?;
    Ok((lambda, inner))
}

fn armijo_search_counted(
    problem: &CompositeProblem,
    x: &[f64],
    fx: &[f64],
    gap: &GapSolution,
    params: &ArmijoParams,
    counters: &mut Counters,
) -> Result<(f64, PointValues, usize)> {
    debug_assert!(gap.theta < 0.0);
    let theta = gap.theta;
    let mut lambda = 1.0f64;
    let mut inner = 0usize;
    loop {
        let trial: Vec<f64> = x
            .iter()
            .zip(&gap.direction)
            .map(|(xi, di)| xi + lambda * di)
            .collect();
        let trial = problem.domain().clamp(&trial);
        let vals = eval_point(problem, &trial, counters)?;
        inner += 1;
        // Worst violation of f_j(trial) <= f_j(x) + zeta lambda theta.
        let mut worst: Option<(usize, f64)> = None;
        for j in 0..fx.len() {
            let bound = fx[j] + params.zeta * lambda * theta;
            let viol = vals.f[j] - bound;
            if viol > 0.0 && worst.map_or(true, |(_, w)| viol > w) {
                worst = Some((j, viol));
            }
        }
        let Some((j_bad, _)) = worst else {
            return Ok((lambda, vals, inner));
        };
        // Quadratic through phi(0) = f_j(x), slope theta, phi(lambda).
        let phi0 = fx[j_bad];
        let phi1 = vals.f[j_bad];
        let denom = 2.0 * (phi1 - phi0 - theta * lambda);
        let candidate = if denom > 0.0 {
            -theta * lambda * lambda / denom
        } else {
            f64::NAN
        };
        let lo = params.omega1 * lambda;
        let hi = params.omega2 * lambda;
        lambda = if candidate.is_finite() {
            candidate.clamp(lo, hi)
        } else {
            0.5 * (lo + hi)
        };
        if lambda < LINE_SEARCH_FLOOR {
            return Err(Error::LineSearchStall(LINE_SEARCH_FLOOR));
        }
    }
}

enum Direction {
    CondG,
    ProxGrad { mu: f64 },
}

/// Run the conditional gradient method from `x0`.
pub fn run_condg(
    problem: &CompositeProblem,
    x0: &[f64],
    rule: &StepRule,
    opts: &SolverOptions,
) -> Result<SolverTrace> {
    rule.validate()?;
    run_inner(problem, x0, Direction::CondG, rule, opts)
}

/// Run the proximal gradient comparator from `x0` with proximity weight
/// `mu`; steps are accepted by the Armijo condition on the proximal gap.
pub fn run_proxgrad(
    problem: &CompositeProblem,
    x0: &[f64],
    mu: f64,
    params: &ArmijoParams,
    opts: &SolverOptions,
) -> Result<SolverTrace> {
    params.validate()?;
    if !(mu > 0.0) {
        return Err(Error::InvalidConfig(format!("mu = {mu} must be positive")));
    }
    run_inner(
        problem,
        x0,
        Direction::ProxGrad { mu },
        &StepRule::Armijo(*params),
        opts,
    )
}

fn run_inner(
    problem: &CompositeProblem,
    x0: &[f64],
    dir_kind: Direction,
    rule: &StepRule,
    opts: &SolverOptions,
) -> Result<SolverTrace> {
    problem.domain().check(x0)?;
    let started = Instant::now();
    let mut counters = Counters::default();

    let mut x = x0.to_vec();
    let mut vals = eval_point(problem, &x, &mut counters)?;
    let mut jac = problem.jacobian(&x)?;
    counters.grad_evals += 1;
    let mut prev_x: Option<Vec<f64>> = None;
    let mut records: Vec<IterationRecord> = Vec::new();

    let finish = |records: Vec<IterationRecord>,
                  reason: StopReason,
                  detail: &str,
                  x: Vec<f64>,
                  f: Vec<f64>,
                  theta_pg: Option<f64>,
                  counters: Counters| SolverTrace {
        records,
        stop_reason: reason,
        stop_detail: detail.to_string(),
        final_x: x,
        final_f: f,
        final_theta_pg: theta_pg,
        counters,
        wall_seconds: started.elapsed().as_secs_f64(),
    };

    let mut k = 0usize;
    loop {
        // Direction subproblem at the current point.
        let sub_started = Instant::now();
        let gap_sol = match dir_kind {
            Direction::CondG => {
                counters.lp_solves += 1;
                gap::condg_direction_with(problem, &x, &jac, &vals.g)?
            }
            Direction::ProxGrad { mu } => {
                counters.qp_solves += 1;
                gap::proxgrad_direction_with(problem, &x, mu, &jac, &vals.g)?
            }
        };
        let sub_seconds = sub_started.elapsed().as_secs_f64();

        // Composite stopping test against the previous iterate. For the
        // proximal method the gap at hand is already theta_PG(x_k).
        if let Some(prev) = &prev_x {
            let decision = match dir_kind {
                Direction::ProxGrad { .. } => check_stop(
                    prev,
                    &x,
                    opts.rel_step_tol,
                    opts.theta_pg_tol,
                    || Ok(gap_sol.theta),
                )?,
                Direction::CondG => check_stop(
                    prev,
                    &x,
                    opts.rel_step_tol,
                    opts.theta_pg_tol,
                    || {
                        counters.qp_solves += 1;
                        gap::proxgrad_direction_with(problem, &x, opts.stop_mu, &jac, &vals.g)
                            .map(|g| g.theta)
                    },
                )?,
            };
            if let StopDecision::Converged { theta_pg } = decision {
                return Ok(finish(
                    records,
                    StopReason::Converged,
                    "composite_test",
                    x,
                    vals.f,
                    Some(theta_pg),
                    counters,
                ));
            }
        }

        // Numerical criticality guard (Step 2).
        if gap_sol.theta >= -CRITICALITY_EPS {
            let (reason, detail) = if k == 0 {
                (StopReason::CriticalAtStart, "gap_critical_at_start")
            } else {
                (StopReason::Converged, "gap_critical")
            };
            let theta_pg = match dir_kind {
                Direction::ProxGrad { .. } => Some(gap_sol.theta),
                Direction::CondG => {
                    counters.qp_solves += 1;
                    Some(
                        gap::proxgrad_direction_with(problem, &x, opts.stop_mu, &jac, &vals.g)?
                            .theta,
                    )
                }
            };
            return Ok(finish(records, reason, detail, x, vals.f, theta_pg, counters));
        }

        // Iteration cap and time budget.
        if k >= opts.max_iter {
            return Ok(finish(
                records,
                StopReason::MaxIterations,
                "iteration_cap",
                x,
                vals.f,
                None,
                counters,
            ));
        }
        if let Some(budget) = opts.time_budget {
            if started.elapsed() >= budget {
                return Ok(finish(
                    records,
                    StopReason::MaxIterations,
                    "time_budget",
                    x,
                    vals.f,
                    None,
                    counters,
                ));
            }
        }

        // Step size and the next iterate.
        let (lambda, next_vals, inner) = match rule {
            StepRule::Armijo(p) => {
                armijo_search_counted(problem, &x, &vals.f, &gap_sol, p, &mut counters)?
            }
            StepRule::Adaptive { lipschitz } => {
                let lambda = adaptive_step(&gap_sol, *lipschitz)?;
                let next: Vec<f64> = x
                    .iter()
                    .zip(&gap_sol.direction)
                    .map(|(xi, di)| xi + lambda * di)
                    .collect();
                let next = problem.domain().clamp(&next);
                let nv = eval_point(problem, &next, &mut counters)?;
                (lambda, nv, 1)
            }
            StepRule::Diminishing => {
                let lambda = diminishing_step(k);
                let next: Vec<f64> = x
                    .iter()
                    .zip(&gap_sol.direction)
                    .map(|(xi, di)| xi + lambda * di)
                    .collect();
                let next = problem.domain().clamp(&next);
                let nv = eval_point(problem, &next, &mut counters)?;
                (lambda, nv, 1)
            }
        };

        records.push(IterationRecord {
            k,
            x: x.clone(),
            f: vals.f.clone(),
            theta: gap_sol.theta,
            lambda,
            inner_evals: inner,
            subproblem_seconds: sub_seconds,
        });

        let next_x: Vec<f64> = x
            .iter()
            .zip(&gap_sol.direction)
            .map(|(xi, di)| xi + lambda * di)
            .collect();
        let next_x = problem.domain().clamp(&next_x);
        prev_x = Some(std::mem::replace(&mut x, next_x));
        vals = next_vals;
        jac = problem.jacobian(&x)?;
        counters.grad_evals += 1;
        k += 1;
    }
}
