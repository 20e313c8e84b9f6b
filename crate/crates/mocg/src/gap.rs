//! The gap function and the two direction-finding subproblems.
//!
//! For a composite problem the gap function at `x` is
//!
//! ```text
//! theta(x) = min_u max_j ( g_j(u) - g_j(x) + <grad h_j(x), u - x> )
//! ```
//!
//! with minimizer `p(x)`; `theta(x) <= 0` everywhere and `theta(x) = 0`
//! exactly at Pareto critical points, which makes it the stopping quantity
//! for the solvers. The conditional-gradient subproblem is this linearized
//! model itself, solved as a linear program; the proximal-gradient variant
//! adds `mu/2 |u - x|^2` and is solved as a quadratic program.
//!
//! With support-function terms the model is reformulated through duality:
//! `g_j(u) = min { <b_j, w> : A_j' w = u, w >= 0 }` for `A_j = [B_j; -B_j]`,
//! `b_j = delta e`, giving one linear program in `(tau, u, w_1, ..., w_m)`
//! where each objective's constraint row carries its own multiplier block
//! `w_j`. Any optimal vertex is accepted as `p(x)`; the solver is
//! deterministic, so reruns reproduce the same choice.

use crate::error::Error;
use crate::lp::{self, LinearProgram, LpRow, LpStatus, RowOp};
use crate::problem::{CompositeProblem, NonsmoothTerm};
use crate::qp::{self, ProxL1Block, ProxSubproblem};
use crate::robust::PolyhedralUncertaintySet;
use crate::Result;

use nalgebra::DMatrix;

/// Which subproblem produced a [`GapSolution`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GapKind {
    CondG,
    ProxGrad { mu: f64 },
}

/// Minimizer, optimal value and step direction of a direction subproblem.
#[derive(Debug, Clone)]
pub struct GapSolution {
    pub p: Vec<f64>,
    pub theta: f64,
    pub direction: Vec<f64>,
    pub kind: GapKind,
}

impl GapSolution {
    fn from_minimizer(p: Vec<f64>, theta: f64, x: &[f64], kind: GapKind) -> Self {
        let direction = p.iter().zip(x).map(|(a, b)| a - b).collect();
        GapSolution {
            p,
            theta,
            direction,
            kind,
        }
    }
}

/// Support function `g(x) = max { <x, z> : z in Z }` of a polyhedral set,
/// evaluated through its dual linear program
/// `min { <b, w> : A' w = x, w >= 0 }`.
///
/// The sign split of `B^{-T} x` is handed to the simplex as a starting
/// basis; the solver still verifies feasibility and optimality, so a bad
/// hint only costs pivots. The recovered maximizer is checked against the
/// primal (membership in `Z` and matching objective) within `1e-7` scaled.
pub fn support_value(set: &PolyhedralUncertaintySet, x: &[f64]) -> Result<f64> {
    let n = set.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "support argument of length {} for set of dimension {n}",
            x.len()
        )));
    }
    let (lp_prob, hint) = support_lp(set, x);
    let sol = lp::solve_lp_hinted(&lp_prob, &hint)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::numerical(
            "support function",
            format!("dual LP ended {:?}", sol.status),
        ));
    }
    // Row duals of the dual LP are the primal maximizer z*.
    let z = &sol.duals;
    let primal: f64 = x.iter().zip(z).map(|(a, b)| a * b).sum();
    let tol = 1e-7 * (1.0 + sol.value.abs());
    if (primal - sol.value).abs() > tol {
        return Err(Error::numerical(
            "support function",
            format!(
                "primal {primal} and dual {} disagree beyond {tol:e}",
                sol.value
            ),
        ));
    }
    // Membership check: -delta e <= B z <= delta e, scaled.
    let bz = set.b() * nalgebra::DVector::from_column_slice(z);
    let slack = set.delta() * (1.0 + 1e-6) + 1e-9;
    for v in bz.iter() {
        if v.abs() > slack {
            return Err(Error::numerical(
                "support function",
                format!("recovered maximizer violates the set: |Bz| = {}", v.abs()),
            ));
        }
    }
    Ok(sol.value)
}

/// Dual support LP and its warm basis.
pub(crate) fn support_lp(
    set: &PolyhedralUncertaintySet,
    x: &[f64],
) -> (LinearProgram, Vec<usize>) {
    let n = set.dim();
    let b = set.b();
    let delta = set.delta();
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut entries = Vec::with_capacity(2 * n);
        for l in 0..n {
            let v = b[(l, i)];
            if v != 0.0 {
                entries.push((l, v));
                entries.push((n + l, -v));
            }
        }
        rows.push(LpRow {
            entries,
            op: RowOp::Eq,
            rhs: x[i],
        });
    }
    let lp_prob = LinearProgram {
        objective: vec![delta; 2 * n],
        rows,
        lower: vec![0.0; 2 * n],
        upper: vec![f64::INFINITY; 2 * n],
    };
    // v = B^{-T} x; basic pattern = sign split of v.
    let mut hint = Vec::with_capacity(n);
    for l in 0..n {
        let mut v = 0.0;
        for k in 0..n {
            v += set.binv_t()[(l, k)] * x[k];
        }
        hint.push(if v >= 0.0 { l } else { n + l });
    }
    (lp_prob, hint)
}

/// Conditional-gradient direction at `x`: evaluates `g_j(x)` and the
/// Jacobian, then solves the linearized subproblem.
pub fn condg_direction(problem: &CompositeProblem, x: &[f64]) -> Result<GapSolution> {
    let jac = problem.jacobian(x)?;
    let gvals = problem.nonsmooth_values(x)?;
    condg_direction_with(problem, x, &jac, &gvals)
}

/// Conditional-gradient direction with precomputed Jacobian and `g_j(x)`
/// values (they are shared with the objective-row right-hand sides, so
/// solvers compute them once per iteration).
pub fn condg_direction_with(
    problem: &CompositeProblem,
    x: &[f64],
    jac: &DMatrix<f64>,
    gvals: &[f64],
) -> Result<GapSolution> {
    problem.domain().check(x)?;
    let n = problem.dim();
    let lp_prob = build_condg_lp(problem, x, jac, gvals);
    let sol = match problem.nonsmooth() {
        NonsmoothTerm::Zero => lp::solve_lp(&lp_prob)?,
        NonsmoothTerm::SupportFunction(sets) => {
            let hint = condg_warm_basis(problem, sets, jac, gvals, &lp_prob);
            lp::solve_lp_warm(&lp_prob, &hint, true)?
        }
    };
    if sol.status != LpStatus::Optimal {
        return Err(Error::numerical(
            "condg subproblem",
            format!("LP ended {:?}", sol.status),
        ));
    }
    let u = problem.domain().clamp(&sol.x[1..1 + n]);
    Ok(GapSolution::from_minimizer(u, sol.value, x, GapKind::CondG))
}

/// Feasible starting basis for the direction LP: the epigraph variable in
/// its worst row, slacks elsewhere, and the sign-split multiplier pattern of
/// `B_j^{-T} u0` for the resting value `u0` of `u` (which must mirror the
/// simplex's own resting rule: the bound of smaller magnitude).
fn condg_warm_basis(
    problem: &CompositeProblem,
    sets: &[PolyhedralUncertaintySet],
    jac: &DMatrix<f64>,
    gvals: &[f64],
    lp_prob: &LinearProgram,
) -> Vec<lp::BasisHint> {
    let n = problem.dim();
    let m = problem.num_objectives();
    let lower = problem.domain().lower();
    let upper = problem.domain().upper();
    let u0: Vec<f64> = (0..n)
        .map(|i| {
            if upper[i].abs() < lower[i].abs() {
                upper[i]
            } else {
                lower[i]
            }
        })
        .collect();
    let mut hint = Vec::with_capacity(m + n * m);
    let mut worst = (0usize, f64::NEG_INFINITY);
    let mut patterns = Vec::with_capacity(m);
    for (j, set) in sets.iter().enumerate() {
        let w = set.binv_t();
        let mut l1 = 0.0;
        let mut pattern = Vec::with_capacity(n);
        for i in 0..n {
            let mut v = 0.0;
            for k in 0..n {
                v += w[(i, k)] * u0[k];
            }
            l1 += v.abs();
            let base = 1 + n + j * 2 * n;
            pattern.push(if v >= 0.0 { base + i } else { base + n + i });
        }
        let expr: f64 = set.delta() * l1
            + (0..n).map(|i| jac[(j, i)] * u0[i]).sum::<f64>();
        let excess = expr - lp_prob.rows[j].rhs;
        if excess > worst.1 {
            worst = (j, excess);
        }
        patterns.push(pattern);
        let _ = gvals;
    }
    hint.push(lp::BasisHint::Column(0));
    for j in 0..m {
        if j != worst.0 {
            hint.push(lp::BasisHint::RowSlack(j));
        }
    }
    for pattern in patterns {
        for c in pattern {
            hint.push(lp::BasisHint::Column(c));
        }
    }
    hint
}

fn build_condg_lp(
    problem: &CompositeProblem,
    x: &[f64],
    jac: &DMatrix<f64>,
    gvals: &[f64],
) -> LinearProgram {
    let n = problem.dim();
    let m = problem.num_objectives();
    let lower = problem.domain().lower();
    let upper = problem.domain().upper();

    match problem.nonsmooth() {
        NonsmoothTerm::Zero => {
            // Variables (tau, u): min tau s.t. <a_j, u> - tau <= <a_j, x>.
            let mut rows = Vec::with_capacity(m);
            for j in 0..m {
                let mut entries = vec![(0usize, -1.0)];
                let mut rhs = 0.0;
                for i in 0..n {
                    let a = jac[(j, i)];
                    if a != 0.0 {
                        entries.push((1 + i, a));
                    }
                    rhs += a * x[i];
                }
                rows.push(LpRow {
                    entries,
                    op: RowOp::Le,
                    rhs,
                });
            }
            let mut objective = vec![0.0; 1 + n];
            objective[0] = 1.0;
            let mut lo = vec![f64::NEG_INFINITY; 1 + n];
            let mut hi = vec![f64::INFINITY; 1 + n];
            lo[1..].copy_from_slice(lower);
            hi[1..].copy_from_slice(upper);
            LinearProgram {
                objective,
                rows,
                lower: lo,
                upper: hi,
            }
        }
        NonsmoothTerm::SupportFunction(sets) => {
            // Variables (tau, u, w_1, ..., w_m) with w_j of length 2n.
            let nv = 1 + n + 2 * n * m;
            let mut rows = Vec::with_capacity(m + n * m);
            for (j, set) in sets.iter().enumerate() {
                let delta = set.delta();
                let mut entries = vec![(0usize, -1.0)];
                let mut rhs = gvals[j];
                for i in 0..n {
                    let a = jac[(j, i)];
                    if a != 0.0 {
                        entries.push((1 + i, a));
                    }
                    rhs += a * x[i];
                }
                let base = 1 + n + j * 2 * n;
                for l in 0..2 * n {
                    entries.push((base + l, delta));
                }
                rows.push(LpRow {
                    entries,
                    op: RowOp::Le,
                    rhs,
                });
            }
            for (j, set) in sets.iter().enumerate() {
                let b = set.b();
                let base = 1 + n + j * 2 * n;
                for i in 0..n {
                    let mut entries = Vec::with_capacity(2 * n + 1);
                    for l in 0..n {
                        let v = b[(l, i)];
                        if v != 0.0 {
                            entries.push((base + l, v));
                            entries.push((base + n + l, -v));
                        }
                    }
                    entries.push((1 + i, -1.0));
                    rows.push(LpRow {
                        entries,
                        op: RowOp::Eq,
                        rhs: 0.0,
                    });
                }
            }
            let mut objective = vec![0.0; nv];
            objective[0] = 1.0;
            let mut lo = vec![0.0; nv];
            let mut hi = vec![f64::INFINITY; nv];
            lo[0] = f64::NEG_INFINITY;
            lo[1..1 + n].copy_from_slice(lower);
            hi[1..1 + n].copy_from_slice(upper);
            LinearProgram {
                objective,
                rows,
                lower: lo,
                upper: hi,
            }
        }
    }
}

/// Test-support hook: expose the conditional-gradient LP for a point.
#[doc(hidden)]
pub fn debug_condg_lp(
    problem: &CompositeProblem,
    x: &[f64],
    jac: &DMatrix<f64>,
    gvals: &[f64],
) -> (LinearProgram, usize) {
    (build_condg_lp(problem, x, jac, gvals), problem.dim())
}

/// Proximal-gradient direction at `x` with proximity weight `mu`.
pub fn proxgrad_direction(problem: &CompositeProblem, x: &[f64], mu: f64) -> Result<GapSolution> {
    let jac = problem.jacobian(x)?;
    let gvals = problem.nonsmooth_values(x)?;
    proxgrad_direction_with(problem, x, mu, &jac, &gvals)
}

/// Proximal-gradient direction with precomputed Jacobian and `g_j(x)`.
pub fn proxgrad_direction_with(
    problem: &CompositeProblem,
    x: &[f64],
    mu: f64,
    jac: &DMatrix<f64>,
    gvals: &[f64],
) -> Result<GapSolution> {
    problem.domain().check(x)?;
    let n = problem.dim();
    let m = problem.num_objectives();
    let grads: Vec<Vec<f64>> = (0..m)
        .map(|j| (0..n).map(|i| jac[(j, i)]).collect())
        .collect();
    let blocks = match problem.nonsmooth() {
        NonsmoothTerm::Zero => vec![],
        NonsmoothTerm::SupportFunction(sets) => sets
            .iter()
            .map(|s| ProxL1Block {
                w: s.binv_t().clone(),
                delta: s.delta(),
            })
            .collect(),
    };
    let sub = ProxSubproblem {
        mu,
        x: x.to_vec(),
        grads,
        g_x: gvals.to_vec(),
        lower: problem.domain().lower().to_vec(),
        upper: problem.domain().upper().to_vec(),
        blocks,
    };
    let dir = qp::solve_prox_subproblem(&sub)?;
    let u = problem.domain().clamp(&dir.u);
    Ok(GapSolution::from_minimizer(
        u,
        dir.value,
        x,
        GapKind::ProxGrad { mu },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{BoxDomain, SmoothObjective};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_box_set(n: usize, delta: f64) -> PolyhedralUncertaintySet {
        PolyhedralUncertaintySet::new(DMatrix::identity(n, n), delta).unwrap()
    }

    fn scalar_square(domain: (f64, f64)) -> CompositeProblem {
        let smooth = SmoothObjective::new(
            1,
            1,
            |x: &[f64]| vec![x[0] * x[0]],
            |x: &[f64]| DMatrix::from_row_slice(1, 1, &[2.0 * x[0]]),
            Some(vec![2.0]),
            true,
        )
        .unwrap();
        CompositeProblem::new(
            "square",
            smooth,
            NonsmoothTerm::Zero,
            BoxDomain::new(vec![domain.0], vec![domain.1]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn support_of_unit_box_is_l1_norm() {
        let set = unit_box_set(2, 1.0);
        let v = support_value(&set, &[3.0, -4.0]).unwrap();
        assert_relative_eq!(v, 7.0, epsilon = 1e-9);
    }

    #[test]
    fn support_at_origin_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(0.0..1.0));
        let set = PolyhedralUncertaintySet::new(b, 0.4).unwrap();
        let v = support_value(&set, &[0.0, 0.0, 0.0]).unwrap();
        assert!(v.abs() <= 1e-10);
    }

    #[test]
    fn support_matches_vertex_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let b = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(0.0..1.0));
            let set = match PolyhedralUncertaintySet::new(b, 0.5) {
                Ok(s) => s,
                Err(_) => continue,
            };
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let lp_value = support_value(&set, &x).unwrap();
            // max over the 2^3 vertices z = B^{-1}(delta s)
            let mut best = f64::NEG_INFINITY;
            for mask in 0..8u32 {
                let signs: Vec<f64> = (0..3)
                    .map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 })
                    .collect();
                let z = set.vertex(&signs);
                let val: f64 = x.iter().zip(&z).map(|(a, b)| a * b).sum();
                best = best.max(val);
            }
            assert_relative_eq!(lp_value, best, epsilon = 1e-7, max_relative = 1e-7);
        }
    }

    #[test]
    fn condg_scalar_square_at_one() {
        // minimize 2(u - 1) over [-1, 1]: p = -1, theta = -4
        let p = scalar_square((-1.0, 1.0));
        let g = condg_direction(&p, &[1.0]).unwrap();
        assert_relative_eq!(g.p[0], -1.0, epsilon = 1e-9);
        assert_relative_eq!(g.theta, -4.0, epsilon = 1e-9);
        assert_relative_eq!(g.direction[0], -2.0, epsilon = 1e-9);
    }

    #[test]
    fn condg_scalar_square_critical_at_zero() {
        let p = scalar_square((-1.0, 1.0));
        let g = condg_direction(&p, &[0.0]).unwrap();
        assert!(g.theta.abs() <= 1e-10, "theta = {}", g.theta);
    }

    #[test]
    fn proxgrad_scalar_square_at_one() {
        // minimize 2(u-1) + (u-1)^2/2 over [-1, 1]: u = -1, value -2
        let p = scalar_square((-1.0, 1.0));
        let g = proxgrad_direction(&p, &[1.0], 1.0).unwrap();
        assert_relative_eq!(g.theta, -2.0, epsilon = 1e-6);
        assert_relative_eq!(g.p[0], -1.0, epsilon = 1e-4);
    }

    #[test]
    fn proxgrad_critical_point_returns_zero() {
        let p = scalar_square((-1.0, 1.0));
        let g = proxgrad_direction(&p, &[0.0], 1.0).unwrap();
        assert!(g.theta >= -1e-12, "theta = {}", g.theta);
        assert!(g.theta <= 1e-7, "theta = {}", g.theta);
        assert!(g.p[0].abs() <= 1e-5);
    }

    #[test]
    fn theta_ordering_on_robust_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let smooth = SmoothObjective::new(
            2,
            2,
            |x: &[f64]| {
                vec![
                    x[0] * x[0] + x[1] * x[1],
                    (x[0] - 5.0) * (x[0] - 5.0) + (x[1] - 5.0) * (x[1] - 5.0),
                ]
            },
            |x: &[f64]| {
                DMatrix::from_row_slice(
                    2,
                    2,
                    &[
                        2.0 * x[0],
                        2.0 * x[1],
                        2.0 * (x[0] - 5.0),
                        2.0 * (x[1] - 5.0),
                    ],
                )
            },
            Some(vec![2.0, 2.0]),
            true,
        )
        .unwrap();
        let sets = (0..2)
            .map(|_| {
                let b = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(0.0..1.0));
                PolyhedralUncertaintySet::new(b, 0.3).unwrap()
            })
            .collect();
        let problem = CompositeProblem::new(
            "bk1-like",
            smooth,
            NonsmoothTerm::SupportFunction(sets),
            BoxDomain::cube(2, -5.0, 10.0).unwrap(),
        )
        .unwrap();
        for _ in 0..25 {
            let x = vec![rng.gen_range(-5.0..10.0), rng.gen_range(-5.0..10.0)];
            let cg = condg_direction(&problem, &x).unwrap();
            let pg = proxgrad_direction(&problem, &x, 1.0).unwrap();
            assert!(cg.theta <= 1e-9, "condg theta = {}", cg.theta);
            assert!(pg.theta <= 1e-9, "prox theta = {}", pg.theta);
            assert!(
                cg.theta <= pg.theta + 1e-8,
                "ordering violated: {} vs {}",
                cg.theta,
                pg.theta
            );
            assert!(problem.domain().contains(&cg.p));
            assert!(problem.domain().contains(&pg.p));
        }
    }
}
