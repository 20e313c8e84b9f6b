//! Shared test oracles: independent reference computations the solver
//! implementations are checked against.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use mocg::lp::{LinearProgram, RowOp};
use mocg::problem::{BoxDomain, CompositeProblem, NonsmoothTerm, SmoothObjective};
use mocg::qp::{QpRow, QuadraticProgram};
use mocg::robust::PolyhedralUncertaintySet;

/// Brute-force LP optimum by enumerating basic solutions: every choice of
/// `n` active constraints among rows (equalities always active) and variable
/// bounds. Returns the best feasible objective value, or `None` when no
/// basic solution is feasible.
pub fn lp_vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    #[derive(Clone, Copy)]
    enum Con {
        Row(usize),
        Lower(usize),
        Upper(usize),
    }
    let mut eq_rows = Vec::new();
    let mut optional: Vec<Con> = Vec::new();
    for (r, row) in lp.rows.iter().enumerate() {
        if row.op == RowOp::Eq {
            eq_rows.push(Con::Row(r));
        } else {
            optional.push(Con::Row(r));
        }
    }
    for i in 0..n {
        if lp.lower[i].is_finite() {
            optional.push(Con::Lower(i));
        }
        if lp.upper[i].is_finite() {
            optional.push(Con::Upper(i));
        }
    }
    if eq_rows.len() > n {
        return None;
    }
    let need = n - eq_rows.len();
    let mut best: Option<f64> = None;
    let mut index = vec![0usize; need];
    // Iterate over all combinations of `need` optional constraints.
    fn combos(
        k: usize,
        start: usize,
        total: usize,
        index: &mut Vec<usize>,
        f: &mut impl FnMut(&[usize]),
    ) {
        if k == 0 {
            f(index);
            return;
        }
        let slot = index.len() - k;
        for i in start..=total.saturating_sub(k) {
            index[slot] = i;
            combos(k - 1, i + 1, total, index, f);
        }
    }
    let feas_tol = 1e-9;
    let mut consider = |chosen: &[usize]| {
        let mut a = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        let mut fill = |slot: usize, con: &Con| match *con {
            Con::Row(r) => {
                for &(j, v) in &lp.rows[r].entries {
                    a[(slot, j)] = v;
                }
                b[slot] = lp.rows[r].rhs;
            }
            Con::Lower(i) => {
                a[(slot, i)] = 1.0;
                b[slot] = lp.lower[i];
            }
            Con::Upper(i) => {
                a[(slot, i)] = 1.0;
                b[slot] = lp.upper[i];
            }
        };
        for (slot, con) in eq_rows.iter().enumerate() {
            fill(slot, con);
        }
        for (off, &ci) in chosen.iter().enumerate() {
            fill(eq_rows.len() + off, &optional[ci]);
        }
        let Some(x) = a.lu().solve(&b) else {
            return;
        };
        // Feasibility of everything.
        for i in 0..n {
            let scale = 1.0 + x[i].abs();
            if x[i] < lp.lower[i] - feas_tol * scale || x[i] > lp.upper[i] + feas_tol * scale {
                return;
            }
        }
        for row in &lp.rows {
            let ax: f64 = row.entries.iter().map(|&(j, v)| v * x[j]).sum();
            let scale = 1.0 + row.rhs.abs();
            let ok = match row.op {
                RowOp::Le => ax <= row.rhs + feas_tol * scale,
                RowOp::Ge => ax >= row.rhs - feas_tol * scale,
                RowOp::Eq => (ax - row.rhs).abs() <= feas_tol * scale,
            };
            if !ok {
                return;
            }
        }
        let value: f64 = lp.objective.iter().zip(x.iter()).map(|(c, v)| c * v).sum();
        best = Some(match best {
            None => value,
            Some(b) => b.min(value),
        });
    };
    if need == 0 {
        consider(&[]);
    } else {
        combos(need, 0, optional.len(), &mut index, &mut consider);
    }
    best
}

/// Projected gradient on a box-constrained strictly convex QP, run to a very
/// tight fixed-point tolerance; independent of the interior-point path.
pub fn qp_projected_gradient_oracle(
    q: &DMatrix<f64>,
    c: &[f64],
    lower: &[f64],
    upper: &[f64],
) -> Vec<f64> {
    let n = c.len();
    let eig = q.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let step = 1.0 / lmax.max(1e-12);
    let mut x: Vec<f64> = (0..n)
        .map(|i| 0.5 * (lower[i].max(-1e3) + upper[i].min(1e3)))
        .collect();
    for _ in 0..500_000 {
        let mut grad = vec![0.0; n];
        for r in 0..n {
            let mut acc = c[r];
            for j in 0..n {
                acc += q[(r, j)] * x[j];
            }
            grad[r] = acc;
        }
        let mut moved: f64 = 0.0;
        for i in 0..n {
            let next = (x[i] - step * grad[i]).clamp(lower[i], upper[i]);
            moved = moved.max((next - x[i]).abs());
            x[i] = next;
        }
        if moved <= 1e-10 * step.max(1e-6) {
            break;
        }
    }
    x
}

/// Global optimum of a small strictly convex QP with general rows by
/// enumerating active sets of the inequality constraints and solving the
/// equality-constrained KKT system for each.
pub fn qp_active_set_enumeration(qp: &QuadraticProgram) -> Option<(Vec<f64>, f64)> {
    let n = qp.num_vars();
    let n_in = qp.in_rows.len();
    let tol = 1e-8;
    let mut best: Option<(Vec<f64>, f64)> = None;
    for mask in 0..(1u32 << n_in) {
        let active: Vec<usize> = (0..n_in).filter(|i| mask >> i & 1 == 1).collect();
        let rows: Vec<&QpRow> = qp
            .eq_rows
            .iter()
            .chain(active.iter().map(|&i| &qp.in_rows[i]))
            .collect();
        let k = rows.len();
        if k > n {
            continue;
        }
        let dim = n + k;
        let mut kkt = DMatrix::zeros(dim, dim);
        let mut rhs = DVector::zeros(dim);
        for i in 0..n {
            for j in 0..n {
                kkt[(i, j)] = qp.q()[(i, j)];
            }
            rhs[i] = -qp.c[i];
        }
        for (ri, row) in rows.iter().enumerate() {
            for &(j, v) in &row.entries {
                kkt[(j, n + ri)] = v;
                kkt[(n + ri, j)] = v;
            }
            rhs[n + ri] = row.rhs;
        }
        let Some(sol) = kkt.lu().solve(&rhs) else {
            continue;
        };
        let x: Vec<f64> = (0..n).map(|i| sol[i]).collect();
        // Primal feasibility of inactive rows, dual feasibility of active.
        let mut ok = true;
        for (i, row) in qp.in_rows.iter().enumerate() {
            let ax: f64 = row.entries.iter().map(|&(j, v)| v * x[j]).sum();
            if mask >> i & 1 == 1 {
                let dual = sol[n + qp.eq_rows.len() + active.iter().position(|&a| a == i).unwrap()];
                // Multiplier sign for <= rows in the convention
                // Qx + c + A'y = 0 used above: y >= 0.
                if dual < -tol {
                    ok = false;
                    break;
                }
            } else if ax > row.rhs + tol * (1.0 + row.rhs.abs()) {
                ok = false;
                break;
            }
        }
        if !ok {
            continue;
        }
        let mut qx = vec![0.0; n];
        for r in 0..n {
            qx[r] = (0..n).map(|j| qp.q()[(r, j)] * x[j]).sum();
        }
        let value = 0.5 * x.iter().zip(&qx).map(|(a, b)| a * b).sum::<f64>()
            + qp.c.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
        match &best {
            Some((_, v)) if *v <= value => {}
            _ => best = Some((x, value)),
        }
    }
    best
}

/// Closed-form support value `delta * |B^{-T} x|_1`, the route independent
/// of the dual LP used by the implementation.
pub fn support_closed_form(set: &PolyhedralUncertaintySet, x: &[f64]) -> f64 {
    let n = set.dim();
    let w = set.binv_t();
    let mut l1 = 0.0;
    for i in 0..n {
        let mut v = 0.0;
        for k in 0..n {
            v += w[(i, k)] * x[k];
        }
        l1 += v.abs();
    }
    set.delta() * l1
}

/// Evaluate the direction model
/// `phi(u) = max_j ( g_j(u) - g_j(x) + <grad h_j(x), u - x> )`
/// on a regular grid and return `(grid minimum, Lipschitz bound, cell radius)`.
pub fn grid_model_minimum(
    problem: &CompositeProblem,
    x: &[f64],
    points_per_axis: usize,
) -> (f64, f64, f64) {
    let n = problem.dim();
    let m = problem.num_objectives();
    let jac = problem.jacobian(x).unwrap();
    let sets = match problem.nonsmooth() {
        NonsmoothTerm::SupportFunction(s) => s.clone(),
        NonsmoothTerm::Zero => vec![],
    };
    let g_x: Vec<f64> = if sets.is_empty() {
        vec![0.0; m]
    } else {
        sets.iter().map(|s| support_closed_form(s, x)).collect()
    };
    let lower = problem.domain().lower();
    let upper = problem.domain().upper();
    let k = points_per_axis;
    let h: Vec<f64> = (0..n)
        .map(|i| (upper[i] - lower[i]) / (k - 1) as f64)
        .collect();
    let cell_radius = 0.5 * h.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut lips: f64 = 0.0;
    for j in 0..m {
        let grad_norm: f64 = (0..n).map(|i| jac[(j, i)] * jac[(j, i)]).sum::<f64>().sqrt();
        let g_lip = if sets.is_empty() { 0.0 } else { sets[j].norm_bound() };
        lips = lips.max(grad_norm + g_lip);
    }
    let mut u = lower.to_vec();
    let mut idx = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let mut phi = f64::NEG_INFINITY;
        for j in 0..m {
            let mut val = -g_x[j];
            for i in 0..n {
                val += jac[(j, i)] * (u[i] - x[i]);
            }
            if !sets.is_empty() {
                val += support_closed_form(&sets[j], &u);
            }
            phi = phi.max(val);
        }
        best = best.min(phi);
        // Advance the grid index odometer.
        let mut axis = 0;
        loop {
            if axis == n {
                return (best, lips, cell_radius);
            }
            idx[axis] += 1;
            if idx[axis] < k {
                u[axis] = lower[axis] + idx[axis] as f64 * h[axis];
                break;
            }
            idx[axis] = 0;
            u[axis] = lower[axis];
            axis += 1;
        }
    }
}

/// Random feasible LP with `n <= 6` variables and at most `max_rows` rows;
/// feasibility is guaranteed by construction around an interior point.
pub fn random_feasible_lp(rng: &mut ChaCha8Rng, n: usize, max_rows: usize) -> LinearProgram {
    let lower: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..0.0)).collect();
    let upper: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..4.0)).collect();
    let x0: Vec<f64> = (0..n)
        .map(|i| rng.gen_range(lower[i]..upper[i]))
        .collect();
    let n_rows = rng.gen_range(1..=max_rows);
    let mut rows = Vec::new();
    for _ in 0..n_rows {
        let entries: Vec<(usize, f64)> = (0..n)
            .filter_map(|j| {
                let v: f64 = rng.gen_range(-2.0..2.0);
                (v.abs() > 0.15).then_some((j, v))
            })
            .collect();
        if entries.is_empty() {
            continue;
        }
        let ax: f64 = entries.iter().map(|&(j, v)| v * x0[j]).sum();
        let r: f64 = rng.gen_range(0.0..3.0);
        let op = match rng.gen_range(0..3) {
            0 => RowOp::Le,
            1 => RowOp::Ge,
            _ => RowOp::Le,
        };
        let rhs = match op {
            RowOp::Le => ax + r,
            RowOp::Ge => ax - r,
            RowOp::Eq => ax,
        };
        rows.push(mocg::lp::LpRow { entries, op, rhs });
    }
    let objective: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    LinearProgram {
        objective,
        rows,
        lower,
        upper,
    }
}

/// Random strictly convex box QP.
pub fn random_box_qp(rng: &mut ChaCha8Rng, n: usize) -> QuadraticProgram {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let q = &a.transpose() * &a + DMatrix::identity(n, n) * rng.gen_range(0.2..1.5);
    let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let lower: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..-0.1)).collect();
    let upper: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
    QuadraticProgram::new(q, c, vec![], vec![], lower, upper).unwrap()
}

/// Quadratic bi-objective test problem with seeded uncertainty sets.
pub fn small_robust_instance(rng: &mut ChaCha8Rng, n: usize) -> CompositeProblem {
    let shift: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..3.0)).collect();
    let shift2 = shift.clone();
    let smooth = SmoothObjective::new(
        n,
        2,
        move |x: &[f64]| {
            let s1: f64 = x.iter().map(|v| v * v).sum();
            let s2: f64 = x
                .iter()
                .zip(&shift)
                .map(|(v, s)| (v - s) * (v - s))
                .sum();
            vec![s1, s2]
        },
        move |x: &[f64]| {
            let mut j = DMatrix::zeros(2, x.len());
            for (i, &v) in x.iter().enumerate() {
                j[(0, i)] = 2.0 * v;
                j[(1, i)] = 2.0 * (v - shift2[i]);
            }
            j
        },
        Some(vec![2.0, 2.0]),
        true,
    )
    .unwrap();
    let delta = rng.gen_range(0.1..0.6);
    let sets: Vec<PolyhedralUncertaintySet> = (0..2)
        .map(|_| loop {
            let b = DMatrix::from_fn(n, n, |_, _| rng.gen_range(0.0..1.0));
            if let Ok(s) = PolyhedralUncertaintySet::new(b, delta) {
                break s;
            }
        })
        .collect();
    CompositeProblem::new(
        format!("robust-quad-{n}"),
        smooth,
        NonsmoothTerm::SupportFunction(sets),
        BoxDomain::cube(n, -2.0, 3.0).unwrap(),
    )
    .unwrap()
}
