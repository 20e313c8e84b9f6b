//! Dense linear programming by bounded-variable primal simplex.
//!
//! The subproblems solved here are small and dense (at most a few hundred
//! rows), so the basis inverse is kept explicitly and updated by elementary
//! row operations, with periodic refactorization to control drift.
//!
//! Method outline:
//! * all rows are turned into equalities by adding one slack per inequality
//!   row, with the slack's bounds encoding the row sense;
//! * phase 1 starts from a crash slack basis and adds artificial columns only
//!   for rows whose slack cannot absorb the residual;
//! * phase 2 minimizes the true objective;
//! * pricing is devex (reference weights, reduced costs updated from the
//!   pivot row and verified against the ftran vector before each pivot) and
//!   switches to Bland's rule after `3 * (cols + rows)` iterations, which
//!   guarantees termination under degeneracy.
//!
//! Callers that already know a good basis (for example the support-function
//! subproblems, whose optimal basis is the sign split of a triangular solve)
//! can pass it through [`solve_lp_warm`]; the hint is validated and the
//! solver falls back to the cold start if it is infeasible or singular.
//! Heavily degenerate instances can additionally request deterministic bound
//! perturbation, which is removed again before the final cleanup pass, so
//! the reported solution always refers to the exact bounds.

use crate::error::Error;
use crate::Result;

const PIVOT_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-8;
const RATIO_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 400;

/// Sense of one linear constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowOp {
    Le,
    Eq,
    Ge,
}

/// One constraint row, stored sparsely as `(column, coefficient)` pairs.
#[derive(Debug, Clone)]
pub struct LpRow {
    pub entries: Vec<(usize, f64)>,
    pub op: RowOp,
    pub rhs: f64,
}

/// A linear program `min c'x  s.t. rows, lb <= x <= ub`.
///
/// Bounds may be `f64::NEG_INFINITY` / `f64::INFINITY`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<LpRow>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.objective.len();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "lp has {n} cost entries but {} lower / {} upper bounds",
                self.lower.len(),
                self.upper.len()
            )));
        }
        for (i, (&l, &u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if l > u {
                return Err(Error::InvalidConfig(format!(
                    "lp variable {i} has empty bound interval [{l}, {u}]"
                )));
            }
            if l.is_nan() || u.is_nan() {
                return Err(Error::InvalidConfig(format!("lp variable {i} has NaN bound")));
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(Error::InvalidConfig(format!("row {r} has non-finite rhs")));
            }
            for &(j, v) in &row.entries {
                if j >= n {
                    return Err(Error::DimensionMismatch(format!(
                        "row {r} references column {j} but lp has {n} variables"
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::InvalidConfig(format!(
                        "row {r} has non-finite coefficient at column {j}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Termination status of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solution report.
///
/// `duals` holds one multiplier per input row, with the sign convention
/// `c = A'y + z` (`z` the bound multipliers): `y_i <= 0` for `<=` rows,
/// `y_i >= 0` for `>=` rows, free for equalities, when the LP is written as a
/// minimization. `residuals` carries the verification numbers used by the
/// tests: primal feasibility, dual feasibility, complementarity and the
/// primal-dual objective gap, all scaled.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub value: f64,
    pub duals: Vec<f64>,
    pub residuals: LpResiduals,
    pub iterations: usize,
}

#[derive(Debug, Clone, Default)]
pub struct LpResiduals {
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
    pub gap: f64,
}

/// Starting-basis entry for [`solve_lp_warm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisHint {
    /// A structural column.
    Column(usize),
    /// The slack of an inequality row.
    RowSlack(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
    /// Free variable resting at zero.
    FreeAtZero,
}

struct Tableau {
    ncols: usize,
    nrows: usize,
    /// Sparse columns of the equality-form constraint matrix (compressed
    /// storage: per-column slices of `col_rows` / `col_vals`).
    col_ptr: Vec<usize>,
    col_rows: Vec<u32>,
    col_vals: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    /// Row-major dense inverse of the basis matrix.
    binv: Vec<f64>,
    xb: Vec<f64>,
    /// Reduced costs (meaningful for nonbasic columns) and devex weights.
    d: Vec<f64>,
    devex: Vec<f64>,
    need_reprice: bool,
    slack_of_row: Vec<usize>,
    pivots_since_refactor: usize,
    total_pivots: usize,
    n_struct: usize,
    n_artificial: usize,
}

enum RatioResult {
    Unbounded,
    BoundFlip(f64),
    Leave { row: usize, step: f64, to_upper: bool },
}

impl Tableau {
    fn new(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let m = lp.rows.len();
        let mut per_col: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for (r, row) in lp.rows.iter().enumerate() {
            for &(j, v) in &row.entries {
                if v != 0.0 {
                    per_col[j].push((r as u32, v));
                }
            }
        }
        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();
        let mut cost = lp.objective.clone();
        let rhs: Vec<f64> = lp.rows.iter().map(|r| r.rhs).collect();

        // One slack per inequality row; its bounds encode the sense.
        let mut slack_of_row = vec![usize::MAX; m];
        for (r, row) in lp.rows.iter().enumerate() {
            match row.op {
                RowOp::Eq => {}
                RowOp::Le => {
                    slack_of_row[r] = per_col.len();
                    per_col.push(vec![(r as u32, 1.0)]);
                    lower.push(0.0);
                    upper.push(f64::INFINITY);
                    cost.push(0.0);
                }
                RowOp::Ge => {
                    slack_of_row[r] = per_col.len();
                    per_col.push(vec![(r as u32, 1.0)]);
                    lower.push(f64::NEG_INFINITY);
                    upper.push(0.0);
                    cost.push(0.0);
                }
            }
        }
        let ncols = per_col.len();
        let mut col_ptr = Vec::with_capacity(ncols + 1);
        let mut col_rows = Vec::new();
        let mut col_vals = Vec::new();
        col_ptr.push(0);
        for col in &per_col {
            for &(r, v) in col {
                col_rows.push(r);
                col_vals.push(v);
            }
            col_ptr.push(col_rows.len());
        }
        Tableau {
            ncols,
            nrows: m,
            col_ptr,
            col_rows,
            col_vals,
            lower,
            upper,
            cost,
            rhs,
            basis: Vec::new(),
            state: vec![VarState::AtLower; ncols],
            binv: Vec::new(),
            xb: Vec::new(),
            d: vec![0.0; ncols],
            devex: vec![1.0; ncols],
            need_reprice: true,
            slack_of_row,
            pivots_since_refactor: 0,
            total_pivots: 0,
            n_struct: n,
            n_artificial: 0,
        }
    }

    #[inline]
    fn col(&self, j: usize) -> (&[u32], &[f64]) {
        let lo = self.col_ptr[j];
        let hi = self.col_ptr[j + 1];
        (&self.col_rows[lo..hi], &self.col_vals[lo..hi])
    }

    fn push_col(&mut self, entries: &[(u32, f64)]) {
        for &(r, v) in entries {
            self.col_rows.push(r);
            self.col_vals.push(v);
        }
        self.col_ptr.push(self.col_rows.len());
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::AtLower => self.lower[j],
            VarState::AtUpper => self.upper[j],
            VarState::FreeAtZero => 0.0,
            VarState::Basic(r) => self.xb[r],
        }
    }

    /// Rest value used when a variable is initially nonbasic.
    fn resting_state(&self, j: usize) -> VarState {
        let l = self.lower[j];
        let u = self.upper[j];
        if l.is_finite() {
            if u.is_finite() && u.abs() < l.abs() {
                VarState::AtUpper
            } else {
                VarState::AtLower
            }
        } else if u.is_finite() {
            VarState::AtUpper
        } else {
            VarState::FreeAtZero
        }
    }

    /// Residual b - A x over nonbasic resting values.
    fn residual(&self) -> Vec<f64> {
        let mut r = self.rhs.clone();
        for j in 0..self.ncols {
            if matches!(self.state[j], VarState::Basic(_)) {
                continue;
            }
            let v = self.nonbasic_value(j);
            if v != 0.0 {
                let (rows, vals) = self.col(j);
                for (&row, &a) in rows.iter().zip(vals) {
                    r[row as usize] -= a * v;
                }
            }
        }
        r
    }

    /// Build `binv` and `xb` from scratch for the current basis.
    fn refactor(&mut self) -> Result<()> {
        let m = self.nrows;
        let mut mat = vec![0.0; m * m];
        for (r, &j) in self.basis.iter().enumerate() {
            let (rows, vals) = self.col(j);
            for (&row, &a) in rows.iter().zip(vals) {
                mat[row as usize * m + r] = a;
            }
        }
        // Gauss-Jordan with partial pivoting into an explicit inverse.
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let mut piv_row = col;
            let mut piv_val = mat[col * m + col].abs();
            for r in col + 1..m {
                let v = mat[r * m + col].abs();
                if v > piv_val {
                    piv_val = v;
                    piv_row = r;
                }
            }
            if piv_val < PIVOT_TOL {
                return Err(Error::numerical(
                    "lp refactor",
                    format!("singular basis at column {col} (pivot {piv_val:e})"),
                ));
            }
            if piv_row != col {
                for k in 0..m {
                    mat.swap(piv_row * m + k, col * m + k);
                    inv.swap(piv_row * m + k, col * m + k);
                }
            }
            let d = mat[col * m + col];
            for k in 0..m {
                mat[col * m + k] /= d;
                inv[col * m + k] /= d;
            }
            for r in 0..m {
                if r != col {
                    let f = mat[r * m + col];
                    if f != 0.0 {
                        for k in 0..m {
                            mat[r * m + k] -= f * mat[col * m + k];
                            inv[r * m + k] -= f * inv[col * m + k];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        let resid = self.residual();
        self.xb = self.mat_vec(&resid);
        self.pivots_since_refactor = 0;
        self.need_reprice = true;
        Ok(())
    }

    /// binv * v (dense).
    fn mat_vec(&self, v: &[f64]) -> Vec<f64> {
        let m = self.nrows;
        let mut out = vec![0.0; m];
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.binv[r * m..(r + 1) * m];
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
        out
    }

    /// binv * column j (sparse input column), traversing binv row-wise.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.nrows;
        let mut out = vec![0.0; m];
        let (rows, vals) = self.col(j);
        for (r, o) in out.iter_mut().enumerate() {
            let brow = &self.binv[r * m..(r + 1) * m];
            let mut acc = 0.0;
            for (&row, &a) in rows.iter().zip(vals) {
                acc += a * brow[row as usize];
            }
            *o = acc;
        }
        out
    }

    /// y' = c_B' binv.
    fn duals_for(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.nrows;
        let mut y = vec![0.0; m];
        for (r, &j) in self.basis.iter().enumerate() {
            let cb = cost[j];
            if cb != 0.0 {
                let row = &self.binv[r * m..(r + 1) * m];
                for (yk, &b) in y.iter_mut().zip(row) {
                    *yk += cb * b;
                }
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        let mut d = self.cost[j];
        let (rows, vals) = self.col(j);
        for (&row, &a) in rows.iter().zip(vals) {
            d -= y[row as usize] * a;
        }
        d
    }

    /// Full recomputation of reduced costs; devex weights are left alone.
    fn reprice(&mut self) {
        let y = self.duals_for(&self.cost);
        for j in 0..self.ncols {
            self.d[j] = match self.state[j] {
                VarState::Basic(_) => 0.0,
                _ => self.reduced_cost(j, &y),
            };
        }
        self.need_reprice = false;
    }

    fn entering_direction(&self, j: usize) -> Option<f64> {
        if self.lower[j] == self.upper[j] {
            return None; // fixed
        }
        let d = self.d[j];
        match self.state[j] {
            VarState::Basic(_) => None,
            VarState::AtLower => (d < -FEAS_TOL).then_some(1.0),
            VarState::AtUpper => (d > FEAS_TOL).then_some(-1.0),
            VarState::FreeAtZero => {
                if d < -FEAS_TOL {
                    Some(1.0)
                } else if d > FEAS_TOL {
                    Some(-1.0)
                } else {
                    None
                }
            }
        }
    }

    /// Devex pricing: largest `d^2 / weight` among eligible columns.
    fn price_devex(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.ncols {
            if let Some(dir) = self.entering_direction(j) {
                let score = self.d[j] * self.d[j] / self.devex[j];
                match best {
                    Some((_, _, s)) if s >= score => {}
                    _ => best = Some((j, dir, score)),
                }
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    /// Bland's rule: first eligible index (caller must reprice first).
    fn price_bland(&self) -> Option<(usize, f64)> {
        (0..self.ncols).find_map(|j| self.entering_direction(j).map(|dir| (j, dir)))
    }

    /// Bounded-variable ratio test for entering column `t` moving in `dir`.
    ///
    /// Ties are broken by pivot magnitude normally and by smallest basic
    /// variable index in Bland mode (needed for the anti-cycling guarantee).
    fn ratio_test(&self, t: usize, dir: f64, w: &[f64], bland: bool) -> RatioResult {
        let own_range = self.upper[t] - self.lower[t];
        let mut limit = if own_range.is_finite() { own_range } else { f64::INFINITY };
        let mut leave: Option<(usize, bool, f64)> = None; // (row, to_upper, |pivot|)
        for r in 0..self.nrows {
            // Basic value moves by -dir * w[r] per unit of entering step.
            let rate = -dir * w[r];
            if rate.abs() <= PIVOT_TOL {
                continue;
            }
            let b = self.basis[r];
            let (bound, to_upper) = if rate < 0.0 {
                (self.lower[b], false)
            } else {
                (self.upper[b], true)
            };
            if !bound.is_finite() {
                continue;
            }
            let room = if rate < 0.0 {
                self.xb[r] - bound
            } else {
                bound - self.xb[r]
            };
            let step = (room.max(0.0)) / rate.abs();
            if step < limit - RATIO_TOL {
                limit = step;
                leave = Some((r, to_upper, w[r].abs()));
            } else if step < limit + RATIO_TOL {
                let better = match leave {
                    None => step < limit,
                    Some((prev_row, _, p)) => {
                        if bland {
                            self.basis[r] < self.basis[prev_row]
                        } else {
                            w[r].abs() > p
                        }
                    }
                };
                if better {
                    limit = limit.min(step);
                    leave = Some((r, to_upper, w[r].abs()));
                }
            }
        }
        match leave {
            None if limit.is_infinite() => RatioResult::Unbounded,
            None => RatioResult::BoundFlip(limit),
            Some((row, to_upper, _)) => RatioResult::Leave { row, step: limit, to_upper },
        }
    }

    /// Basis change with incremental reduced-cost and devex updates.
    fn pivot_and_update(&mut self, t: usize, dir: f64, w: &[f64], row: usize, step: f64, to_upper: bool) -> Result<()> {
        let m = self.nrows;
        let pivot = w[row];
        if pivot.abs() < PIVOT_TOL {
            return Err(Error::numerical(
                "lp pivot",
                format!("pivot {pivot:e} below tolerance"),
            ));
        }
        // Pivot row of B^{-1} A over nonbasic columns, taken before the
        // inverse changes.
        let binv_row: Vec<f64> = self.binv[row * m..(row + 1) * m].to_vec();
        let d_t = self.d[t];
        let ratio = d_t / pivot;
        let dev_t = self.devex[t];

        let enter_from = self.nonbasic_value(t);
        for r in 0..m {
            self.xb[r] -= dir * step * w[r];
        }
        let leaving = self.basis[row];
        self.state[leaving] = if to_upper { VarState::AtUpper } else { VarState::AtLower };
        self.basis[row] = t;
        self.state[t] = VarState::Basic(row);
        self.xb[row] = enter_from + dir * step;

        // Elementary row update of the inverse.
        let inv_piv = 1.0 / pivot;
        for v in &mut self.binv[row * m..(row + 1) * m] {
            *v *= inv_piv;
        }
        {
            let binv = &mut self.binv;
            let (before, rest) = binv.split_at_mut(row * m);
            let (prow, after) = rest.split_at_mut(m);
            for (r, chunk) in before.chunks_exact_mut(m).enumerate() {
                let f = w[r];
                if f != 0.0 {
                    for (c, &p) in chunk.iter_mut().zip(prow.iter()) {
                        *c -= f * p;
                    }
                }
            }
            for (roff, chunk) in after.chunks_exact_mut(m).enumerate() {
                let f = w[row + 1 + roff];
                if f != 0.0 {
                    for (c, &p) in chunk.iter_mut().zip(prow.iter()) {
                        *c -= f * p;
                    }
                }
            }
        }

        // Reduced costs / weights along the pivot row.
        if !self.need_reprice {
            for j in 0..self.ncols {
                if matches!(self.state[j], VarState::Basic(_)) {
                    self.d[j] = 0.0;
                    continue;
                }
                if j == leaving {
                    // Its column is e_row in the old basis frame.
                    self.d[j] = -ratio;
                    self.devex[j] = (dev_t / (pivot * pivot)).max(1.0);
                    continue;
                }
                let lo = self.col_ptr[j];
                let hi = self.col_ptr[j + 1];
                let mut alpha = 0.0;
                for (ri, &v) in self.col_rows[lo..hi].iter().zip(&self.col_vals[lo..hi]) {
                    alpha += binv_row[*ri as usize] * v;
                }
                if alpha != 0.0 {
                    self.d[j] -= ratio * alpha;
                    let cand = (alpha / pivot) * (alpha / pivot) * dev_t;
                    if cand > self.devex[j] {
                        self.devex[j] = cand;
                    }
                }
            }
        }
        self.d[t] = 0.0;
        self.pivots_since_refactor += 1;
        self.total_pivots += 1;
        Ok(())
    }

    fn bound_flip(&mut self, t: usize, dir: f64, w: &[f64], step: f64) {
        for r in 0..self.nrows {
            self.xb[r] -= dir * step * w[r];
        }
        self.state[t] = match self.state[t] {
            VarState::AtLower => VarState::AtUpper,
            VarState::AtUpper => VarState::AtLower,
            other => other,
        };
    }

    /// Run the simplex loop on the current cost vector.
    fn optimize(&mut self) -> Result<LpStatus> {
        let bland_after = 3 * (self.ncols + self.nrows);
        let hard_cap = 50 * (self.ncols + self.nrows) + 10_000;
        let mut iter = 0usize;
        self.need_reprice = true;
        loop {
            iter += 1;
            if iter > hard_cap {
                return Err(Error::numerical(
                    "lp simplex",
                    format!("iteration cap {hard_cap} reached"),
                ));
            }
            if self.pivots_since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let bland = iter > bland_after;
            if bland || self.need_reprice {
                self.reprice();
            }
            let Some((t, dir)) = (if bland {
                self.price_bland()
            } else {
                self.price_devex()
            }) else {
                // Nothing eligible under (possibly drifted) incremental
                // costs: confirm with a clean pricing pass.
                self.reprice();
                let confirm = if bland {
                    self.price_bland()
                } else {
                    self.price_devex()
                };
                match confirm {
                    None => return Ok(LpStatus::Optimal),
                    Some((t, dir)) => {
                        if self.step(t, dir, bland)? == Some(LpStatus::Unbounded) {
                            return Ok(LpStatus::Unbounded);
                        }
                        continue;
                    }
                }
            };
            // Verify the candidate's reduced cost against the exact value
            // from the ftran vector; drift can make stale entries look
            // attractive.
            let w = self.ftran(t);
            let mut d_exact = self.cost[t];
            for r in 0..self.nrows {
                d_exact -= self.cost[self.basis[r]] * w[r];
            }
            let still_improving = match self.state[t] {
                VarState::AtLower => d_exact < -FEAS_TOL,
                VarState::AtUpper => d_exact > FEAS_TOL,
                VarState::FreeAtZero => d_exact.abs() > FEAS_TOL,
                VarState::Basic(_) => false,
            };
            if !still_improving {
                self.d[t] = d_exact;
                continue;
            }
            self.d[t] = d_exact;
            match self.ratio_test(t, dir, &w, bland) {
                RatioResult::Unbounded => return Ok(LpStatus::Unbounded),
                RatioResult::BoundFlip(step) => self.bound_flip(t, dir, &w, step),
                RatioResult::Leave { row, step, to_upper } => {
                    self.pivot_and_update(t, dir, &w, row, step, to_upper)?;
                }
            }
        }
    }

    /// One forced step for a freshly priced candidate (confirmation path).
    fn step(&mut self, t: usize, dir: f64, bland: bool) -> Result<Option<LpStatus>> {
        let w = self.ftran(t);
        match self.ratio_test(t, dir, &w, bland) {
            RatioResult::Unbounded => Ok(Some(LpStatus::Unbounded)),
            RatioResult::BoundFlip(step) => {
                self.bound_flip(t, dir, &w, step);
                Ok(None)
            }
            RatioResult::Leave { row, step, to_upper } => {
                self.pivot_and_update(t, dir, &w, row, step, to_upper)?;
                Ok(None)
            }
        }
    }
}

/// Solve a linear program.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    solve_inner(lp, None, false)
}

/// Solve with a starting basis of structural columns; falls back to the
/// cold start when the hint is singular or infeasible.
pub fn solve_lp_hinted(lp: &LinearProgram, hint: &[usize]) -> Result<LpSolution> {
    let hint: Vec<BasisHint> = hint.iter().map(|&c| BasisHint::Column(c)).collect();
    solve_inner(lp, Some(&hint), false)
}

/// Solve with a starting basis that may reference row slacks, optionally
/// applying deterministic bound perturbation against degenerate stalling.
pub fn solve_lp_warm(
    lp: &LinearProgram,
    hint: &[BasisHint],
    perturb: bool,
) -> Result<LpSolution> {
    solve_inner(lp, Some(hint), perturb)
}

fn perturbation(j: usize) -> f64 {
    // Deterministic, distinct per column, tiny against the 1e-8 feasibility
    // tolerance.
    1e-10 * (1.0 + (j.wrapping_mul(2654435761) % 97) as f64)
}

fn solve_inner(lp: &LinearProgram, hint: Option<&[BasisHint]>, perturb: bool) -> Result<LpSolution> {
    lp.validate()?;
    let mut tab = Tableau::new(lp);
    for j in 0..tab.ncols {
        tab.state[j] = tab.resting_state(j);
    }
    let saved_bounds = if perturb {
        let saved = (tab.lower.clone(), tab.upper.clone());
        for j in 0..tab.ncols {
            let eps = perturbation(j);
            if tab.lower[j].is_finite() && tab.lower[j] != tab.upper[j] {
                tab.lower[j] -= eps;
            }
            if tab.upper[j].is_finite() && tab.lower[j] != tab.upper[j] {
                tab.upper[j] += eps;
            }
        }
        Some(saved)
    } else {
        None
    };

    let mut warm = false;
    if let Some(h) = hint {
        if h.len() == tab.nrows && try_hint(&mut tab, h).is_ok() {
            warm = true;
        }
    }
    if !warm {
        phase_one(&mut tab)?;
        // Feasibility check of phase 1.
        let infeas: f64 = (0..tab.nrows)
            .map(|r| {
                let j = tab.basis[r];
                if j >= tab.n_struct + slack_count(lp) {
                    tab.xb[r].abs()
                } else {
                    0.0
                }
            })
            .sum();
        let scale = 1.0 + lp.rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);
        if infeas > FEAS_TOL * scale * 10.0 {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: vec![0.0; lp.num_vars()],
                value: f64::NAN,
                duals: vec![0.0; lp.rows.len()],
                residuals: LpResiduals::default(),
                iterations: tab.total_pivots,
            });
        }
        // Freeze any artificial still in the problem.
        let art_start = tab.n_struct + slack_count(lp);
        for j in art_start..tab.ncols {
            tab.lower[j] = 0.0;
            tab.upper[j] = 0.0;
        }
    }

    // Phase 2 on the true objective (artificial costs stay zero).
    let mut status = tab.optimize()?;
    if status == LpStatus::Optimal {
        if let Some((lo, up)) = saved_bounds {
            // Remove the perturbation and clean up with exact bounds; the
            // current basis is feasible within the perturbation size, far
            // inside the feasibility tolerance.
            tab.lower[..lo.len()].copy_from_slice(&lo);
            tab.upper[..up.len()].copy_from_slice(&up);
            tab.refactor()?;
            status = tab.optimize()?;
        }
    }
    if status == LpStatus::Unbounded {
        return Ok(LpSolution {
            status,
            x: vec![0.0; lp.num_vars()],
            value: f64::NEG_INFINITY,
            duals: vec![0.0; lp.rows.len()],
            residuals: LpResiduals::default(),
            iterations: tab.total_pivots,
        });
    }
    // Clean refactor before reporting.
    tab.refactor()?;
    let y = tab.duals_for(&tab.cost);

    let mut x = vec![0.0; lp.num_vars()];
    for (j, xj) in x.iter_mut().enumerate() {
        *xj = tab.nonbasic_value(j);
    }
    let value: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    let duals = y[..lp.rows.len()].to_vec();
    let residuals = verify(lp, &x, &duals, value);
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        value,
        duals,
        residuals,
        iterations: tab.total_pivots,
    })
}

fn slack_count(lp: &LinearProgram) -> usize {
    lp.rows.iter().filter(|r| r.op != RowOp::Eq).count()
}

fn try_hint(tab: &mut Tableau, hint: &[BasisHint]) -> Result<()> {
    let mut cols = Vec::with_capacity(hint.len());
    for h in hint {
        let c = match *h {
            BasisHint::Column(c) => {
                if c >= tab.n_struct {
                    return Err(Error::InvalidConfig(
                        "hint references a column outside the structural range".into(),
                    ));
                }
                c
            }
            BasisHint::RowSlack(r) => {
                let s = *tab
                    .slack_of_row
                    .get(r)
                    .ok_or_else(|| Error::InvalidConfig("hint row out of range".into()))?;
                if s == usize::MAX {
                    return Err(Error::InvalidConfig(
                        "hint references the slack of an equality row".into(),
                    ));
                }
                s
            }
        };
        cols.push(c);
    }
    {
        let mut sorted = cols.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != cols.len() {
            return Err(Error::InvalidConfig("duplicate hint columns".into()));
        }
    }
    let saved_state = tab.state.clone();
    tab.basis = cols.clone();
    for (r, &j) in cols.iter().enumerate() {
        tab.state[j] = VarState::Basic(r);
    }
    let ok = tab.refactor().is_ok() && basis_feasible(tab);
    if ok {
        Ok(())
    } else {
        tab.state = saved_state;
        tab.basis.clear();
        Err(Error::numerical("lp hint", "hint basis rejected"))
    }
}

fn basis_feasible(tab: &Tableau) -> bool {
    tab.basis.iter().enumerate().all(|(r, &j)| {
        let v = tab.xb[r];
        v >= tab.lower[j] - 1e-7 && v <= tab.upper[j] + 1e-7
    })
}

fn phase_one(tab: &mut Tableau) -> Result<()> {
    let m = tab.nrows;
    let resid = tab.residual();
    // Crash: basic slack where it can absorb the residual, artificial
    // otherwise.
    let mut basis = vec![usize::MAX; m];
    let mut phase1_cost = vec![0.0; tab.ncols];
    for r in 0..m {
        let sj = tab.slack_of_row[r];
        let can_absorb = sj != usize::MAX
            && resid[r] >= tab.lower[sj] - FEAS_TOL
            && resid[r] <= tab.upper[sj] + FEAS_TOL;
        if can_absorb {
            basis[r] = sj;
        } else {
            // Artificial column sign-matched to the residual.
            let sign = if resid[r] >= 0.0 { 1.0 } else { -1.0 };
            tab.push_col(&[(r as u32, sign)]);
            tab.lower.push(0.0);
            tab.upper.push(f64::INFINITY);
            tab.cost.push(0.0);
            tab.state.push(VarState::AtLower);
            tab.d.push(0.0);
            tab.devex.push(1.0);
            phase1_cost.push(1.0);
            basis[r] = tab.col_ptr.len() - 2;
            tab.n_artificial += 1;
        }
    }
    tab.ncols = tab.col_ptr.len() - 1;
    while phase1_cost.len() < tab.ncols {
        phase1_cost.push(0.0);
    }
    tab.basis = basis;
    for (r, &j) in tab.basis.iter().enumerate() {
        tab.state[j] = VarState::Basic(r);
    }
    tab.refactor()?;
    if tab.n_artificial == 0 {
        return Ok(());
    }
    let true_cost = std::mem::replace(&mut tab.cost, phase1_cost);
    tab.optimize()?;
    tab.cost = true_cost;
    tab.need_reprice = true;
    Ok(())
}

/// Residuals for an optimal report; used by the unit tests and by callers
/// that want to double-check a solve.
fn verify(lp: &LinearProgram, x: &[f64], duals: &[f64], value: f64) -> LpResiduals {
    let scale_b = 1.0 + lp.rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);
    let mut primal: f64 = 0.0;
    let mut compl: f64 = 0.0;
    let mut dual_obj = 0.0;
    for (row, &y) in lp.rows.iter().zip(duals) {
        let ax: f64 = row.entries.iter().map(|&(j, v)| v * x[j]).sum();
        let slack = row.rhs - ax;
        let viol = match row.op {
            RowOp::Le => (-slack).max(0.0),
            RowOp::Ge => slack.max(0.0),
            RowOp::Eq => slack.abs(),
        };
        primal = primal.max(viol / scale_b);
        compl = compl.max((y * slack).abs() / scale_b.max(1.0 + y.abs()));
        dual_obj += y * row.rhs;
    }
    // Bound violations and reduced-cost complementarity.
    let mut z = lp.objective.to_vec();
    for (row, &y) in lp.rows.iter().zip(duals) {
        for &(j, v) in &row.entries {
            z[j] -= y * v;
        }
    }
    let mut dual_res: f64 = 0.0;
    for j in 0..lp.num_vars() {
        let (l, u) = (lp.lower[j], lp.upper[j]);
        let scale_x = 1.0 + x[j].abs();
        primal = primal.max(((l - x[j]).max(0.0)).max((x[j] - u).max(0.0)) / scale_x);
        let at_l = l.is_finite() && x[j] - l < FEAS_TOL * scale_x;
        let at_u = u.is_finite() && u - x[j] < FEAS_TOL * scale_x;
        let zj = z[j];
        let scale_z = 1.0 + zj.abs();
        if at_l && at_u {
            dual_obj += zj * x[j];
        } else if at_l {
            dual_res = dual_res.max((-zj).max(0.0) / scale_z);
            dual_obj += zj * l;
        } else if at_u {
            dual_res = dual_res.max(zj.max(0.0) / scale_z);
            dual_obj += zj * u;
        } else {
            dual_res = dual_res.max(zj.abs() / scale_z);
            compl = compl.max((zj * x[j]).abs() / (1.0 + x[j].abs()));
        }
    }
    let gap = (value - dual_obj).abs() / (1.0 + value.abs());
    LpResiduals {
        primal,
        dual: dual_res,
        complementarity: compl,
        gap,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn row(entries: Vec<(usize, f64)>, op: RowOp, rhs: f64) -> LpRow {
        LpRow { entries, op, rhs }
    }

    #[test]
    fn single_variable_bounds() {
        // min x s.t. 1 <= x <= 5
        let lp = LinearProgram {
            objective: vec![1.0],
            rows: vec![],
            lower: vec![1.0],
            upper: vec![5.0],
        };
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_relative_eq!(sol.x[0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(sol.value, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn vertex_optimum() {
        // min -x - y s.t. x + y <= 1, x,y >= 0  => value -1 on the facet x+y=1
        let lp = LinearProgram {
            objective: vec![-1.0, -1.0],
            rows: vec![row(vec![(0, 1.0), (1, 1.0)], RowOp::Le, 1.0)],
            lower: vec![0.0, 0.0],
            upper: vec![f64::INFINITY, f64::INFINITY],
        };
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_relative_eq!(sol.value, -1.0, epsilon = 1e-9);
        assert_relative_eq!(sol.x[0] + sol.x[1], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn equality_and_duals() {
        // min x1 + 2 x2 s.t. x1 + x2 = 1, x >= 0; optimum x = (1, 0), y = 1
        let lp = LinearProgram {
            objective: vec![1.0, 2.0],
            rows: vec![row(vec![(0, 1.0), (1, 1.0)], RowOp::Eq, 1.0)],
            lower: vec![0.0, 0.0],
            upper: vec![f64::INFINITY, f64::INFINITY],
        };
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_relative_eq!(sol.x[0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(sol.duals[0], 1.0, epsilon = 1e-9);
        assert!(sol.residuals.gap <= 1e-8);
    }

    #[test]
    fn detects_infeasible() {
        // x <= -1 with x >= 0
        let lp = LinearProgram {
            objective: vec![1.0],
            rows: vec![row(vec![(0, 1.0)], RowOp::Le, -1.0)],
            lower: vec![0.0],
            upper: vec![f64::INFINITY],
        };
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        let lp = LinearProgram {
            objective: vec![-1.0],
            rows: vec![],
            lower: vec![0.0],
            upper: vec![f64::INFINITY],
        };
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
    }

    #[test]
    fn beale_cycling_example_terminates() {
        // Classic degenerate instance that cycles under naive pricing.
        // min -3/4 x1 + 150 x2 - 1/50 x3 + 6 x4
        // s.t. 1/4 x1 - 60 x2 - 1/25 x3 + 9 x4 <= 0
        //      1/2 x1 - 90 x2 - 1/50 x3 + 3 x4 <= 0
        //      x3 <= 1,  x >= 0
        let lp = LinearProgram {
            objective: vec![-0.75, 150.0, -0.02, 6.0],
            rows: vec![
                row(
                    vec![(0, 0.25), (1, -60.0), (2, -0.04), (3, 9.0)],
                    RowOp::Le,
                    0.0,
                ),
                row(
                    vec![(0, 0.5), (1, -90.0), (2, -0.02), (3, 3.0)],
                    RowOp::Le,
                    0.0,
                ),
                row(vec![(2, 1.0)], RowOp::Le, 1.0),
            ],
            lower: vec![0.0; 4],
            upper: vec![f64::INFINITY; 4],
        };
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_relative_eq!(sol.value, -0.05, epsilon = 1e-9);
    }

    #[test]
    fn free_variable() {
        // min x + y, x free with x + y >= 2 and x <= 3, y in [0, 10]
        let lp = LinearProgram {
            objective: vec![1.0, 1.0],
            rows: vec![row(vec![(0, 1.0), (1, 1.0)], RowOp::Ge, 2.0)],
            lower: vec![f64::NEG_INFINITY, 0.0],
            upper: vec![3.0, 10.0],
        };
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_relative_eq!(sol.value, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn hinted_solve_matches_cold() {
        // min -x - 2y s.t. x + y = 1.5, x in [0,1], y in [0,1]
        let lp = LinearProgram {
            objective: vec![-1.0, -2.0],
            rows: vec![row(vec![(0, 1.0), (1, 1.0)], RowOp::Eq, 1.5)],
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
        };
        let cold = solve_lp(&lp).unwrap();
        let warm = solve_lp_hinted(&lp, &[0]).unwrap();
        assert_eq!(cold.status, LpStatus::Optimal);
        assert_relative_eq!(cold.value, warm.value, epsilon = 1e-9);
        assert_relative_eq!(cold.x[1], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn warm_basis_with_slack_hint() {
        // min -x - y s.t. x + y <= 4, x - y <= 1, 0 <= x,y <= 3.
        let lp = LinearProgram {
            objective: vec![-1.0, -1.0],
            rows: vec![
                row(vec![(0, 1.0), (1, 1.0)], RowOp::Le, 4.0),
                row(vec![(0, 1.0), (1, -1.0)], RowOp::Le, 1.0),
            ],
            lower: vec![0.0, 0.0],
            upper: vec![3.0, 3.0],
        };
        let cold = solve_lp(&lp).unwrap();
        let warm = solve_lp_warm(
            &lp,
            &[BasisHint::RowSlack(0), BasisHint::RowSlack(1)],
            false,
        )
        .unwrap();
        assert_relative_eq!(cold.value, warm.value, epsilon = 1e-9);
        assert_relative_eq!(warm.value, -4.0, epsilon = 1e-9);
    }

    #[test]
    fn perturbed_solve_matches_exact() {
        let lp = LinearProgram {
            objective: vec![-2.0, -3.0, 1.0],
            rows: vec![
                row(vec![(0, 1.0), (1, 2.0), (2, 1.0)], RowOp::Le, 10.0),
                row(vec![(0, 3.0), (1, 1.0)], RowOp::Le, 15.0),
                row(vec![(1, 1.0), (2, -1.0)], RowOp::Ge, -2.0),
            ],
            lower: vec![0.0, 0.0, 0.0],
            upper: vec![6.0, 6.0, 6.0],
        };
        let exact = solve_lp(&lp).unwrap();
        let pert = solve_lp_warm(&lp, &[], true).unwrap();
        assert_eq!(pert.status, LpStatus::Optimal);
        assert_relative_eq!(exact.value, pert.value, epsilon = 1e-8);
        assert!(pert.residuals.primal <= 1e-8);
    }

    #[test]
    fn fixed_variables_are_respected() {
        let lp = LinearProgram {
            objective: vec![-1.0, -1.0],
            rows: vec![row(vec![(0, 1.0), (1, 1.0)], RowOp::Le, 10.0)],
            lower: vec![2.0, 0.0],
            upper: vec![2.0, 3.0],
        };
        let sol = solve_lp(&lp).unwrap();
        assert_relative_eq!(sol.x[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(sol.x[1], 3.0, epsilon = 1e-9);
    }
}
