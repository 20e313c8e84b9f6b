//! Convex quadratic programming by a primal-dual interior-point method
//! (Mehrotra predictor-corrector).
//!
//! Two entry points share the same iteration driver:
//!
//! * [`solve_qp`] — generic dense convex QPs with equality rows, inequality
//!   rows and variable bounds. The Newton system is solved by folding the
//!   inequality scalings into `H = Q + D + A_in' D_in A_in`, a Cholesky of
//!   `H`, and a Schur complement over the equality rows.
//! * [`solve_prox_subproblem`] — the proximal direction-finding subproblem
//!   `min_u max_j ( g_j(u) - g_j(x) + <a_j, u - x> ) + mu/2 |u - x|^2` over a
//!   box, written in epigraph form with one auxiliary vector per support
//!   term. Its KKT backend eliminates the (diagonal) epigraph block
//!   analytically, so each iteration factors only a `(1+n) x (1+n)` matrix.
//!   The minimizing `u` and the optimal value are returned; the multiplier
//!   block of the equivalent `(tau, u, w)` program is the sign split of
//!   `B_j^{-T} u`, which the tests exercise against the literal formulation.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::Result;

const DEFAULT_TOL: f64 = 1e-9;
const ACCEPT_TOL: f64 = 1e-7;
const MAX_ITER: usize = 80;
const STATIC_REG: f64 = 1e-11;
const SCHUR_REG: f64 = 1e-11;

/// Sparse constraint row.
#[derive(Debug, Clone)]
pub struct QpRow {
    pub entries: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// `min 1/2 x'Qx + c'x  s.t.  A_eq x = b_eq, A_in x <= b_in, lb <= x <= ub`.
#[derive(Debug, Clone)]
pub struct QuadraticProgram {
    q: DMatrix<f64>,
    pub c: Vec<f64>,
    pub eq_rows: Vec<QpRow>,
    pub in_rows: Vec<QpRow>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl QuadraticProgram {
    /// Builds a program, checking that `q` is symmetric (within `1e-12`
    /// scaled) and positive semidefinite (eigenvalue floor `-1e-10` scaled).
    pub fn new(
        q: DMatrix<f64>,
        c: Vec<f64>,
        eq_rows: Vec<QpRow>,
        in_rows: Vec<QpRow>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self> {
        let n = c.len();
        if q.nrows() != n || q.ncols() != n || lower.len() != n || upper.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "qp with {n} costs has Q {}x{}, {} lower, {} upper",
                q.nrows(),
                q.ncols(),
                lower.len(),
                upper.len()
            )));
        }
        let scale = 1.0 + q.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        for i in 0..n {
            for j in (i + 1)..n {
                if (q[(i, j)] - q[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidConfig(format!(
                        "Q not symmetric at ({i},{j}): {} vs {}",
                        q[(i, j)],
                        q[(j, i)]
                    )));
                }
            }
        }
        if n <= 128 {
            let eig = q.clone().symmetric_eigen();
            let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            if min_eig < -1e-10 * scale {
                return Err(Error::InvalidConfig(format!(
                    "Q is not positive semidefinite (min eigenvalue {min_eig:e})"
                )));
            }
        }
        for row in eq_rows.iter().chain(&in_rows) {
            for &(j, _) in &row.entries {
                if j >= n {
                    return Err(Error::DimensionMismatch(format!(
                        "row references column {j} but qp has {n} variables"
                    )));
                }
            }
        }
        Ok(QuadraticProgram {
            q,
            c,
            eq_rows,
            in_rows,
            lower,
            upper,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

/// Solution report with the worst scaled KKT residual at exit.
///
/// `dual_value` is the Lagrangian dual objective at the reported
/// multipliers; for a convex program it never exceeds the primal value by
/// more than the residual level.
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub status: QpStatus,
    pub x: Vec<f64>,
    pub value: f64,
    pub dual_value: f64,
    pub duals_eq: Vec<f64>,
    pub duals_in: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// Operations the interior-point driver needs from a problem backend.
trait QpOps {
    fn nvars(&self) -> usize;
    fn n_eq(&self) -> usize;
    fn n_in(&self) -> usize;
    fn cost(&self) -> &[f64];
    fn b_eq(&self) -> &[f64];
    fn b_in(&self) -> &[f64];
    fn lower(&self) -> &[f64];
    fn upper(&self) -> &[f64];
    fn q_mul(&self, x: &[f64], out: &mut [f64]);
    fn eq_mul(&self, x: &[f64], out: &mut [f64]);
    fn eq_tmul_acc(&self, y: &[f64], out: &mut [f64]);
    fn in_mul(&self, x: &[f64], out: &mut [f64]);
    fn in_tmul_acc(&self, lam: &[f64], out: &mut [f64]);
    fn factor(&mut self, d_in: &[f64], d_lo: &[f64], d_up: &[f64]) -> Result<()>;
    fn solve_kkt(&self, rx: &[f64], ry: &[f64], dx: &mut [f64], dy: &mut [f64]) -> Result<()>;
}

// ---------------------------------------------------------------------------
// Generic dense backend
// ---------------------------------------------------------------------------

struct DenseOps<'a> {
    qp: &'a QuadraticProgram,
    chol_h: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    chol_s: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    b_eq: Vec<f64>,
    b_in: Vec<f64>,
}

impl<'a> DenseOps<'a> {
    fn new(qp: &'a QuadraticProgram) -> Self {
        DenseOps {
            qp,
            chol_h: None,
            chol_s: None,
            b_eq: qp.eq_rows.iter().map(|r| r.rhs).collect(),
            b_in: qp.in_rows.iter().map(|r| r.rhs).collect(),
        }
    }
}

impl QpOps for DenseOps<'_> {
    fn nvars(&self) -> usize {
        self.qp.num_vars()
    }
    fn n_eq(&self) -> usize {
        self.qp.eq_rows.len()
    }
    fn n_in(&self) -> usize {
        self.qp.in_rows.len()
    }
    fn cost(&self) -> &[f64] {
        &self.qp.c
    }
    fn b_eq(&self) -> &[f64] {
        &self.b_eq
    }
    fn b_in(&self) -> &[f64] {
        &self.b_in
    }
    fn lower(&self) -> &[f64] {
        &self.qp.lower
    }
    fn upper(&self) -> &[f64] {
        &self.qp.upper
    }

    fn q_mul(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        for r in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += self.qp.q[(r, j)] * x[j];
            }
            out[r] = acc;
        }
    }

    fn eq_mul(&self, x: &[f64], out: &mut [f64]) {
        for (r, row) in self.qp.eq_rows.iter().enumerate() {
            out[r] = row.entries.iter().map(|&(j, v)| v * x[j]).sum();
        }
    }

    fn eq_tmul_acc(&self, y: &[f64], out: &mut [f64]) {
        for (r, row) in self.qp.eq_rows.iter().enumerate() {
            for &(j, v) in &row.entries {
                out[j] += v * y[r];
            }
        }
    }

    fn in_mul(&self, x: &[f64], out: &mut [f64]) {
        for (r, row) in self.qp.in_rows.iter().enumerate() {
            out[r] = row.entries.iter().map(|&(j, v)| v * x[j]).sum();
        }
    }

    fn in_tmul_acc(&self, lam: &[f64], out: &mut [f64]) {
        for (r, row) in self.qp.in_rows.iter().enumerate() {
            for &(j, v) in &row.entries {
                out[j] += v * lam[r];
            }
        }
    }

    fn factor(&mut self, d_in: &[f64], d_lo: &[f64], d_up: &[f64]) -> Result<()> {
        let n = self.nvars();
        let scale = 1.0 + self.qp.q.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let mut h = self.qp.q.clone();
        for i in 0..n {
            h[(i, i)] += d_lo[i] + d_up[i] + STATIC_REG * scale;
        }
        for (r, row) in self.qp.in_rows.iter().enumerate() {
            let d = d_in[r];
            for &(j1, v1) in &row.entries {
                for &(j2, v2) in &row.entries {
                    h[(j1, j2)] += d * v1 * v2;
                }
            }
        }
        let chol = cholesky_with_bump(h, "qp factor")?;
        let m = self.n_eq();
        if m > 0 {
            let mut at = DMatrix::zeros(n, m);
            for (r, row) in self.qp.eq_rows.iter().enumerate() {
                for &(j, v) in &row.entries {
                    at[(j, r)] = v;
                }
            }
            let hinv_at = chol.solve(&at);
            let mut s = DMatrix::zeros(m, m);
            for r in 0..m {
                for c in 0..m {
                    let mut acc = 0.0;
                    for &(j, v) in &self.qp.eq_rows[r].entries {
                        acc += v * hinv_at[(j, c)];
                    }
                    s[(r, c)] = acc;
                }
            }
            for r in 0..m {
                s[(r, r)] += SCHUR_REG;
            }
            self.chol_s = Some(
                s.cholesky()
                    .ok_or_else(|| Error::numerical("qp factor", "Schur block not PD"))?,
            );
        }
        self.chol_h = Some(chol);
        Ok(())
    }

    fn solve_kkt(&self, rx: &[f64], ry: &[f64], dx: &mut [f64], dy: &mut [f64]) -> Result<()> {
        let chol = self.chol_h.as_ref().unwrap();
        let t = chol.solve(&DVector::from_column_slice(rx));
        let m = self.n_eq();
        if m == 0 {
            dx.copy_from_slice(t.as_slice());
            return Ok(());
        }
        let mut rhs_s = DVector::zeros(m);
        for (r, row) in self.qp.eq_rows.iter().enumerate() {
            let at: f64 = row.entries.iter().map(|&(j, v)| v * t[j]).sum();
            rhs_s[r] = at - ry[r];
        }
        let y = self.chol_s.as_ref().unwrap().solve(&rhs_s);
        let mut rx2 = DVector::from_column_slice(rx);
        for (r, row) in self.qp.eq_rows.iter().enumerate() {
            for &(j, v) in &row.entries {
                rx2[j] -= v * y[r];
            }
        }
        let x = chol.solve(&rx2);
        dx.copy_from_slice(x.as_slice());
        dy.copy_from_slice(y.as_slice());
        Ok(())
    }
}

/// Solve a generic dense convex QP.
pub fn solve_qp(qp: &QuadraticProgram) -> Result<QpSolution> {
    let mut ops = DenseOps::new(qp);
    let report = ipm(&mut ops, DEFAULT_TOL, MAX_ITER)?;
    let mut qx = vec![0.0; qp.num_vars()];
    ops.q_mul(&report.x, &mut qx);
    let value = 0.5 * dot(&report.x, &qx) + dot(&qp.c, &report.x);
    // Lagrangian dual at the reported multipliers:
    // -1/2 x'Qx - y'b_eq - lam'b_in + zl'l - zu'u, with the bound duals
    // reconstructed from the stationarity split.
    let dual_value = {
        let mut acc = -0.5 * dot(&report.x, &qx);
        for (y, row) in report.y.iter().zip(&qp.eq_rows) {
            acc -= y * row.rhs;
        }
        for (l, row) in report.lam.iter().zip(&qp.in_rows) {
            acc -= l * row.rhs;
        }
        // Residual of stationarity without bound duals = zl - zu.
        let mut z = qx.clone();
        for (i, zi) in z.iter_mut().enumerate() {
            *zi += qp.c[i];
        }
        for (y, row) in report.y.iter().zip(&qp.eq_rows) {
            for &(j, v) in &row.entries {
                z[j] += y * v;
            }
        }
        for (l, row) in report.lam.iter().zip(&qp.in_rows) {
            for &(j, v) in &row.entries {
                z[j] += l * v;
            }
        }
        for i in 0..qp.num_vars() {
            // z[i] = zl_i - zu_i; attribute the positive part to the lower
            // bound and the negative part to the upper bound.
            let zl = z[i].max(0.0);
            let zu = (-z[i]).max(0.0);
            if qp.lower[i].is_finite() {
                acc += zl * qp.lower[i];
            }
            if qp.upper[i].is_finite() {
                acc -= zu * qp.upper[i];
            }
        }
        acc
    };
    Ok(QpSolution {
        status: report.status,
        x: report.x,
        value,
        dual_value,
        duals_eq: report.y,
        duals_in: report.lam,
        kkt_residual: report.kkt_residual,
        iterations: report.iterations,
    })
}

// ---------------------------------------------------------------------------
// Structured backend for the proximal direction subproblem
// ---------------------------------------------------------------------------

/// One support-function term `g_j(u) = delta * |W u|_1` with `W = B_j^{-T}`.
#[derive(Debug, Clone)]
pub struct ProxL1Block {
    pub w: DMatrix<f64>,
    pub delta: f64,
}

/// Inputs of the proximal direction subproblem at the current point `x`.
///
/// `blocks` is empty when the nonsmooth term is zero; otherwise it has one
/// entry per objective, aligned with `grads` and `g_x`.
#[derive(Debug, Clone)]
pub struct ProxSubproblem {
    pub mu: f64,
    pub x: Vec<f64>,
    pub grads: Vec<Vec<f64>>,
    pub g_x: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub blocks: Vec<ProxL1Block>,
}

/// Result of [`solve_prox_subproblem`].
#[derive(Debug, Clone)]
pub struct ProxDirection {
    /// Minimizer `u` of the regularized model.
    pub u: Vec<f64>,
    /// Value of the max part at `u`.
    pub tau: f64,
    /// Optimal value of the whole subproblem (`tau + mu/2 |u - x|^2`).
    pub value: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
}

struct ProxOps {
    n: usize,
    m: usize,
    has_blocks: bool,
    mu: f64,
    cost: Vec<f64>,
    b_in: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    grads: Vec<Vec<f64>>,
    blocks: Vec<ProxL1Block>,
    /// Row-major copies of each block's W for contiguous row access.
    w_rows: Vec<Vec<f64>>,
    // Factorization state (refreshed by `factor`).
    h_tt: Vec<f64>,
    c_ut: Vec<f64>,
    d_e: Vec<f64>,
    g_hat: DMatrix<f64>,
    chol_m: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    reg: f64,
}

impl ProxOps {
    fn new(p: &ProxSubproblem) -> Result<Self> {
        let n = p.x.len();
        let m = p.grads.len();
        if p.lower.len() != n || p.upper.len() != n || p.g_x.len() != m {
            return Err(Error::DimensionMismatch(
                "prox subproblem dimensions disagree".into(),
            ));
        }
        let has_blocks = !p.blocks.is_empty();
        if has_blocks && p.blocks.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "{} support blocks for {} objectives",
                p.blocks.len(),
                m
            )));
        }
        if !(p.mu > 0.0) {
            return Err(Error::InvalidConfig(format!("mu = {} must be positive", p.mu)));
        }
        let nt = if has_blocks { n * m } else { 0 };
        let nvars = 1 + n + nt;
        let mut cost = vec![0.0; nvars];
        cost[0] = 1.0;
        for i in 0..n {
            cost[1 + i] = -p.mu * p.x[i];
        }
        let mut b_in = Vec::with_capacity(m + 2 * nt);
        for j in 0..m {
            b_in.push(p.g_x[j] + dot(&p.grads[j], &p.x));
        }
        b_in.resize(m + 2 * nt, 0.0);
        let mut lower = vec![f64::NEG_INFINITY; nvars];
        let mut upper = vec![f64::INFINITY; nvars];
        for i in 0..n {
            lower[1 + i] = p.lower[i];
            upper[1 + i] = p.upper[i];
        }
        for k in 0..nt {
            lower[1 + n + k] = 0.0;
        }
        let w_rows = p
            .blocks
            .iter()
            .map(|b| {
                let mut flat = vec![0.0; n * n];
                for i in 0..n {
                    for k in 0..n {
                        flat[i * n + k] = b.w[(i, k)];
                    }
                }
                flat
            })
            .collect();
        Ok(ProxOps {
            n,
            m,
            has_blocks,
            mu: p.mu,
            cost,
            b_in,
            lower,
            upper,
            grads: p.grads.clone(),
            blocks: p.blocks.clone(),
            w_rows,
            h_tt: vec![0.0; nt],
            c_ut: vec![0.0; nt],
            d_e: vec![0.0; m],
            g_hat: DMatrix::zeros(m, n),
            chol_m: None,
            reg: STATIC_REG,
        })
    }

    fn nt(&self) -> usize {
        if self.has_blocks {
            self.n * self.m
        } else {
            0
        }
    }

    #[inline]
    fn t_var(&self, j: usize, i: usize) -> usize {
        1 + self.n + j * self.n + i
    }

    #[inline]
    fn l1_row(&self, j: usize, i: usize, minus: bool) -> usize {
        self.m + j * 2 * self.n + if minus { self.n } else { 0 } + i
    }
}

impl QpOps for ProxOps {
    fn nvars(&self) -> usize {
        1 + self.n + self.nt()
    }
    fn n_eq(&self) -> usize {
        0
    }
    fn n_in(&self) -> usize {
        self.m + 2 * self.nt()
    }
    fn cost(&self) -> &[f64] {
        &self.cost
    }
    fn b_eq(&self) -> &[f64] {
        &[]
    }
    fn b_in(&self) -> &[f64] {
        &self.b_in
    }
    fn lower(&self) -> &[f64] {
        &self.lower
    }
    fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn q_mul(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for i in 0..self.n {
            out[1 + i] = self.mu * x[1 + i];
        }
    }

    fn eq_mul(&self, _x: &[f64], _out: &mut [f64]) {}
    fn eq_tmul_acc(&self, _y: &[f64], _out: &mut [f64]) {}

    fn in_mul(&self, x: &[f64], out: &mut [f64]) {
        let (n, m) = (self.n, self.m);
        let tau = x[0];
        let u = &x[1..1 + n];
        for j in 0..m {
            let mut acc = -tau + dot(&self.grads[j], u);
            if self.has_blocks {
                let delta = self.blocks[j].delta;
                for i in 0..n {
                    acc += delta * x[self.t_var(j, i)];
                }
            }
            out[j] = acc;
        }
        if self.has_blocks {
            for j in 0..m {
                let rows = &self.w_rows[j];
                for i in 0..n {
                    let wrow = &rows[i * n..(i + 1) * n];
                    let v: f64 = wrow.iter().zip(u).map(|(a, b)| a * b).sum();
                    let t = x[self.t_var(j, i)];
                    out[self.l1_row(j, i, false)] = v - t;
                    out[self.l1_row(j, i, true)] = -v - t;
                }
            }
        }
    }

    fn in_tmul_acc(&self, lam: &[f64], out: &mut [f64]) {
        let (n, m) = (self.n, self.m);
        for j in 0..m {
            let l = lam[j];
            out[0] -= l;
            for i in 0..n {
                out[1 + i] += l * self.grads[j][i];
            }
            if self.has_blocks {
                let delta = self.blocks[j].delta;
                for i in 0..n {
                    out[self.t_var(j, i)] += l * delta;
                }
            }
        }
        if self.has_blocks {
            for j in 0..m {
                let rows = &self.w_rows[j];
                for i in 0..n {
                    let lp = lam[self.l1_row(j, i, false)];
                    let lm = lam[self.l1_row(j, i, true)];
                    let diff = lp - lm;
                    if diff != 0.0 {
                        let wrow = &rows[i * n..(i + 1) * n];
                        for (o, &wv) in out[1..1 + n].iter_mut().zip(wrow) {
                            *o += diff * wv;
                        }
                    }
                    out[self.t_var(j, i)] -= lp + lm;
                }
            }
        }
    }

    fn factor(&mut self, d_in: &[f64], d_lo: &[f64], d_up: &[f64]) -> Result<()> {
        let (n, m) = (self.n, self.m);
        let reg = self.reg;
        // u-block after eliminating the (diagonal) epigraph block,
        // accumulated in a flat row-major buffer.
        let mut s_flat = vec![0.0; n * n];
        for i in 0..n {
            s_flat[i * n + i] = self.mu + d_lo[1 + i] + d_up[1 + i] + reg;
        }
        if self.has_blocks {
            for j in 0..m {
                let rows = &self.w_rows[j];
                for i in 0..n {
                    let k = j * n + i;
                    let dp = d_in[self.l1_row(j, i, false)];
                    let dm = d_in[self.l1_row(j, i, true)];
                    let d0 = d_lo[self.t_var(j, i)];
                    let htt = dp + dm + d0 + reg;
                    self.h_tt[k] = htt;
                    let cut = dm - dp;
                    self.c_ut[k] = cut;
                    // Stable form of (dp + dm) - cut^2 / htt: the naive
                    // difference cancels catastrophically once the barrier
                    // scalings spread, and a negative weight here would
                    // spoil positive definiteness downstream.
                    let alpha = (4.0 * dp * dm + (dp + dm) * (d0 + reg)) / htt;
                    if alpha != 0.0 {
                        let wrow = &rows[i * n..(i + 1) * n];
                        for a in 0..n {
                            let wa = alpha * wrow[a];
                            if wa != 0.0 {
                                let dst = &mut s_flat[a * n..(a + 1) * n];
                                for (d, &wv) in dst.iter_mut().zip(wrow) {
                                    *d += wa * wv;
                                }
                            }
                        }
                    }
                }
            }
        }
        let s_uu = DMatrix::from_row_slice(n, n, &s_flat);
        // Objective rows after the same elimination, and their diagonal block.
        for j in 0..m {
            for i in 0..n {
                self.g_hat[(j, i)] = self.grads[j][i];
            }
            let mut f_jj = 0.0;
            if self.has_blocks {
                let delta = self.blocks[j].delta;
                let rows = &self.w_rows[j];
                for i in 0..n {
                    let k = j * n + i;
                    let coef = self.c_ut[k] * delta / self.h_tt[k];
                    if coef != 0.0 {
                        let wrow = &rows[i * n..(i + 1) * n];
                        for a in 0..n {
                            self.g_hat[(j, a)] -= coef * wrow[a];
                        }
                    }
                    f_jj += delta * delta / self.h_tt[k];
                }
            }
            // E + F is strictly positive on its own; adding the static
            // regularizer here would distort the fold weight once the
            // barrier scaling gets large.
            let e_jj = 1.0 / d_in[j];
            self.d_e[j] = 1.0 / (e_jj + f_jj);
        }
        // Reduced (tau, u) system.
        let mut mm = DMatrix::zeros(1 + n, 1 + n);
        mm[(0, 0)] = reg + self.d_e.iter().sum::<f64>();
        for a in 0..n {
            let mut cross = 0.0;
            for j in 0..m {
                cross -= self.d_e[j] * self.g_hat[(j, a)];
            }
            mm[(0, 1 + a)] = cross;
            mm[(1 + a, 0)] = cross;
        }
        for a in 0..n {
            for b in 0..n {
                let mut acc = s_uu[(a, b)];
                for j in 0..m {
                    acc += self.d_e[j] * self.g_hat[(j, a)] * self.g_hat[(j, b)];
                }
                mm[(1 + a, 1 + b)] = acc;
            }
        }
        self.chol_m = Some(cholesky_with_bump(mm, "prox qp factor")?);
        Ok(())
    }

    fn solve_kkt(&self, rx: &[f64], _ry: &[f64], dx: &mut [f64], _dy: &mut [f64]) -> Result<()> {
        let (n, m) = (self.n, self.m);
        let rx_tau = rx[0];
        let rx_u = &rx[1..1 + n];
        // rhs_u = rx_u - H_ut H_tt^{-1} rx_t ; rhs_w = -G_t H_tt^{-1} rx_t.
        let mut rhs_u = rx_u.to_vec();
        let mut rhs_w = vec![0.0; m];
        if self.has_blocks {
            for j in 0..m {
                let rows = &self.w_rows[j];
                let delta = self.blocks[j].delta;
                for i in 0..n {
                    let k = j * n + i;
                    let rt = rx[self.t_var(j, i)] / self.h_tt[k];
                    if rt != 0.0 {
                        let c = self.c_ut[k] * rt;
                        let wrow = &rows[i * n..(i + 1) * n];
                        for (o, &wv) in rhs_u.iter_mut().zip(wrow) {
                            *o -= c * wv;
                        }
                        rhs_w[j] -= delta * rt;
                    }
                }
            }
        }
        let mut red = DVector::zeros(1 + n);
        red[0] = rx_tau;
        for j in 0..m {
            let de_r = self.d_e[j] * rhs_w[j];
            red[0] -= de_r;
            for a in 0..n {
                red[1 + a] += de_r * self.g_hat[(j, a)];
            }
        }
        for a in 0..n {
            red[1 + a] += rhs_u[a];
        }
        let sol = self.chol_m.as_ref().unwrap().solve(&red);
        let dtau = sol[0];
        let du = &sol.as_slice()[1..1 + n];
        // Internal multiplier block of the objective rows.
        let mut wv = vec![0.0; m];
        for j in 0..m {
            let mut acc = -dtau - rhs_w[j];
            for a in 0..n {
                acc += self.g_hat[(j, a)] * du[a];
            }
            wv[j] = self.d_e[j] * acc;
        }
        dx[0] = dtau;
        dx[1..1 + n].copy_from_slice(du);
        if self.has_blocks {
            for j in 0..m {
                let rows = &self.w_rows[j];
                let delta = self.blocks[j].delta;
                for i in 0..n {
                    let k = j * n + i;
                    let wrow = &rows[i * n..(i + 1) * n];
                    let wdu: f64 = wrow.iter().zip(du.iter()).map(|(a, b)| a * b).sum();
                    let rt = rx[self.t_var(j, i)];
                    dx[self.t_var(j, i)] = (rt - self.c_ut[k] * wdu - delta * wv[j]) / self.h_tt[k];
                }
            }
        }
        Ok(())
    }
}

/// Solve the proximal direction subproblem; see the module docs.
pub fn solve_prox_subproblem(p: &ProxSubproblem) -> Result<ProxDirection> {
    let mut ops = ProxOps::new(p)?;
    let report = ipm(&mut ops, DEFAULT_TOL, MAX_ITER)?;
    if report.status != QpStatus::Optimal {
        return Err(Error::numerical(
            "prox subproblem",
            format!("interior point ended with {:?}", report.status),
        ));
    }
    let n = p.x.len();
    let u: Vec<f64> = report.x[1..1 + n].to_vec();
    // Evaluate the max part exactly at u rather than trusting tau alone.
    let mut tau = f64::NEG_INFINITY;
    for j in 0..p.grads.len() {
        let mut lin = -p.g_x[j];
        for i in 0..n {
            lin += p.grads[j][i] * (u[i] - p.x[i]);
        }
        if !p.blocks.is_empty() {
            let b = &p.blocks[j];
            let mut l1 = 0.0;
            for i in 0..n {
                let mut v = 0.0;
                for k in 0..n {
                    v += b.w[(i, k)] * u[k];
                }
                l1 += v.abs();
            }
            lin += b.delta * l1;
        }
        tau = tau.max(lin);
    }
    let prox: f64 =
        0.5 * p.mu * u.iter().zip(&p.x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    Ok(ProxDirection {
        u,
        tau,
        value: tau + prox,
        kkt_residual: report.kkt_residual,
        iterations: report.iterations,
    })
}

// ---------------------------------------------------------------------------
// Interior-point driver
// ---------------------------------------------------------------------------

struct IpmReport {
    status: QpStatus,
    x: Vec<f64>,
    y: Vec<f64>,
    lam: Vec<f64>,
    kkt_residual: f64,
    iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cholesky with escalating diagonal bumps relative to the matrix scale:
/// extreme barrier scalings can push a mathematically positive definite
/// system past what plain f64 factorization tolerates.
fn cholesky_with_bump(
    mut mat: DMatrix<f64>,
    context: &'static str,
) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let n = mat.nrows();
    let scale = (0..n).map(|i| mat[(i, i)].abs()).fold(0.0f64, f64::max).max(1.0);
    let mut bump = 0.0;
    for attempt in 0..5 {
        if attempt > 0 {
            let add = scale * 1e-14 * 100f64.powi(attempt - 1) - bump;
            for i in 0..n {
                mat[(i, i)] += add;
            }
            bump += add;
        }
        if let Some(c) = mat.clone().cholesky() {
            return Ok(c);
        }
    }
    Err(Error::numerical(context, "matrix not positive definite"))
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, &x| a.max(x.abs()))
}

fn ipm<O: QpOps>(ops: &mut O, tol: f64, max_iter: usize) -> Result<IpmReport> {
    let n = ops.nvars();
    let n_eq = ops.n_eq();
    let n_in = ops.n_in();
    let lower = ops.lower().to_vec();
    let upper = ops.upper().to_vec();
    let fin_lo: Vec<usize> = (0..n).filter(|&i| lower[i].is_finite()).collect();
    let fin_up: Vec<usize> = (0..n).filter(|&i| upper[i].is_finite()).collect();
    let kappa = n_in + fin_lo.len() + fin_up.len();

    // Strictly interior start.
    let mut x = vec![0.0; n];
    for i in 0..n {
        let (l, u) = (lower[i], upper[i]);
        x[i] = if l.is_finite() && u.is_finite() {
            0.5 * (l + u)
        } else if l.is_finite() {
            l + 1.0
        } else if u.is_finite() {
            u - 1.0
        } else {
            0.0
        };
    }
    let mut y = vec![0.0; n_eq];
    let mut s = vec![1.0; n_in];
    let mut lam = vec![1.0; n_in];
    let mut zl = vec![0.0; n];
    let mut zu = vec![0.0; n];
    for &i in &fin_lo {
        zl[i] = 1.0;
    }
    for &i in &fin_up {
        zu[i] = 1.0;
    }
    if n_in > 0 {
        let mut ax = vec![0.0; n_in];
        ops.in_mul(&x, &mut ax);
        for r in 0..n_in {
            s[r] = (ops.b_in()[r] - ax[r]).abs().max(1.0);
        }
    }

    if kappa == 0 {
        return equality_newton(ops, &mut x, &mut y, tol);
    }

    let mut scratch = Scratch::new(n, n_eq, n_in);
    let mut best_kkt = f64::INFINITY;
    let mut best_state: Option<(Vec<f64>, Vec<f64>, Vec<f64>)> = None;
    let mut iterations = 0;

    for iter in 0..max_iter {
        iterations = iter;
        let res = residuals(ops, &x, &y, &lam, &s, &zl, &zu, &fin_lo, &fin_up);
        let mu = (dot(&s, &lam)
            + fin_lo.iter().map(|&i| (x[i] - lower[i]) * zl[i]).sum::<f64>()
            + fin_up.iter().map(|&i| (upper[i] - x[i]) * zu[i]).sum::<f64>())
            / kappa as f64;
        let rel_gap = mu / (1.0 + res.obj_scale);
        let kkt = res.rel_dual.max(res.rel_primal).max(rel_gap);
        if !mu.is_finite() || x.iter().any(|v| !v.is_finite()) {
            // Fall back to the best iterate seen; extreme late-stage barrier
            // scalings can overflow after the solution is already good.
            if let Some((bx, by, blam)) = best_state {
                return Ok(IpmReport {
                    status: if best_kkt <= ACCEPT_TOL {
                        QpStatus::Optimal
                    } else {
                        QpStatus::NumericalFailure
                    },
                    x: bx,
                    y: by,
                    lam: blam,
                    kkt_residual: best_kkt,
                    iterations,
                });
            }
            return Ok(IpmReport {
                status: QpStatus::NumericalFailure,
                x,
                y,
                lam,
                kkt_residual: best_kkt,
                iterations,
            });
        }
        if kkt < best_kkt {
            best_kkt = kkt;
            best_state = Some((x.clone(), y.clone(), lam.clone()));
        }
        // The duality gap drives the loop; the equation residuals flatten
        // out near the f64 floor of the problem scale, so they get a
        // one-order allowance.
        if rel_gap <= tol && res.rel_dual <= 10.0 * tol && res.rel_primal <= 10.0 * tol {
            return Ok(IpmReport {
                status: QpStatus::Optimal,
                x,
                y,
                lam,
                kkt_residual: kkt,
                iterations,
            });
        }
        // The duals blowing up while the primal residual refuses to move is
        // the practical certificate of an empty feasible set.
        let dual_mag = inf_norm(&lam).max(inf_norm(&zl)).max(inf_norm(&zu));
        if dual_mag > 1e10 && res.rel_primal > 1e-6 {
            return Ok(IpmReport {
                status: QpStatus::Infeasible,
                x,
                y,
                lam,
                kkt_residual: kkt,
                iterations,
            });
        }

        let mut d_in = vec![0.0; n_in];
        for r in 0..n_in {
            d_in[r] = (lam[r] / s[r]).max(1e-14);
        }
        let mut d_lo = vec![0.0; n];
        for &i in &fin_lo {
            d_lo[i] = (zl[i] / (x[i] - lower[i])).max(0.0);
        }
        let mut d_up = vec![0.0; n];
        for &i in &fin_up {
            d_up[i] = (zu[i] / (upper[i] - x[i])).max(0.0);
        }
        ops.factor(&d_in, &d_lo, &d_up)?;

        let scaling = Scaling {
            d_in: &d_in,
            d_lo: &d_lo,
            d_up: &d_up,
        };
        let aff = newton_step(
            ops, &res, &x, &s, &lam, &zl, &zu, &lower, &upper, &fin_lo, &fin_up, &scaling,
            None, &mut scratch,
        )?;
        let (ap_aff, ad_aff) = max_steps(
            &x, &s, &lam, &zl, &zu, &lower, &upper, &fin_lo, &fin_up, &aff, 1.0,
        );
        let mu_aff = {
            let mut acc = 0.0;
            for r in 0..n_in {
                acc += (s[r] + ap_aff * aff.ds[r]) * (lam[r] + ad_aff * aff.dlam[r]);
            }
            for &i in &fin_lo {
                acc += (x[i] + ap_aff * aff.dx[i] - lower[i]) * (zl[i] + ad_aff * aff.dzl[i]);
            }
            for &i in &fin_up {
                acc += (upper[i] - x[i] - ap_aff * aff.dx[i]) * (zu[i] + ad_aff * aff.dzu[i]);
            }
            acc / kappa as f64
        };
        let sigma = (mu_aff / mu).max(0.0).powi(3).clamp(1e-10, 1.0);

        let step = newton_step(
            ops, &res, &x, &s, &lam, &zl, &zu, &lower, &upper, &fin_lo, &fin_up, &scaling,
            Some((sigma * mu, &aff)),
            &mut scratch,
        )?;
        let eta = if mu < 1e-6 { 0.9999 } else { 0.995 };
        let (ap, ad) = max_steps(
            &x, &s, &lam, &zl, &zu, &lower, &upper, &fin_lo, &fin_up, &step, eta,
        );
        for i in 0..n {
            x[i] += ap * step.dx[i];
        }
        for r in 0..n_eq {
            y[r] += ad * step.dy[r];
        }
        for r in 0..n_in {
            s[r] += ap * step.ds[r];
            lam[r] += ad * step.dlam[r];
        }
        for &i in &fin_lo {
            zl[i] += ad * step.dzl[i];
        }
        for &i in &fin_up {
            zu[i] += ad * step.dzu[i];
        }
    }

    let res = residuals(ops, &x, &y, &lam, &s, &zl, &zu, &fin_lo, &fin_up);
    let mu = (dot(&s, &lam)
        + fin_lo.iter().map(|&i| (x[i] - lower[i]) * zl[i]).sum::<f64>()
        + fin_up.iter().map(|&i| (upper[i] - x[i]) * zu[i]).sum::<f64>())
        / kappa.max(1) as f64;
    let kkt = res.rel_dual.max(res.rel_primal).max(mu / (1.0 + res.obj_scale));
    if kkt > ACCEPT_TOL && best_kkt <= ACCEPT_TOL {
        if let Some((bx, by, blam)) = best_state {
            return Ok(IpmReport {
                status: QpStatus::Optimal,
                x: bx,
                y: by,
                lam: blam,
                kkt_residual: best_kkt,
                iterations,
            });
        }
    }
    let status = if kkt <= ACCEPT_TOL {
        QpStatus::Optimal
    } else if res.rel_primal > 1e-5 && mu / (1.0 + res.obj_scale) < 1e-8 {
        QpStatus::Infeasible
    } else {
        QpStatus::NumericalFailure
    };
    Ok(IpmReport {
        status,
        x,
        y,
        lam,
        kkt_residual: kkt,
        iterations,
    })
}

struct Residuals {
    r_dual: Vec<f64>,
    r_eq: Vec<f64>,
    r_in: Vec<f64>,
    rel_dual: f64,
    rel_primal: f64,
    obj_scale: f64,
}

#[allow(clippy::too_many_arguments)]
fn residuals<O: QpOps>(
    ops: &O,
    x: &[f64],
    y: &[f64],
    lam: &[f64],
    s: &[f64],
    zl: &[f64],
    zu: &[f64],
    fin_lo: &[usize],
    fin_up: &[usize],
) -> Residuals {
    let n = ops.nvars();
    let n_eq = ops.n_eq();
    let n_in = ops.n_in();
    let mut r_dual = vec![0.0; n];
    ops.q_mul(x, &mut r_dual);
    let qx_norm = inf_norm(&r_dual);
    let mut obj_scale = 0.5 * dot(&r_dual, x).abs() + dot(ops.cost(), x).abs();
    for (rd, c) in r_dual.iter_mut().zip(ops.cost()) {
        *rd += c;
    }
    ops.eq_tmul_acc(y, &mut r_dual);
    ops.in_tmul_acc(lam, &mut r_dual);
    for &i in fin_lo {
        r_dual[i] -= zl[i];
    }
    for &i in fin_up {
        r_dual[i] += zu[i];
    }
    let mut r_eq = vec![0.0; n_eq];
    if n_eq > 0 {
        ops.eq_mul(x, &mut r_eq);
        for (r, b) in r_eq.iter_mut().zip(ops.b_eq()) {
            *r -= b;
        }
    }
    let mut r_in = vec![0.0; n_in];
    if n_in > 0 {
        ops.in_mul(x, &mut r_in);
        for r in 0..n_in {
            r_in[r] += s[r] - ops.b_in()[r];
        }
    }
    let dual_scale = 1.0 + inf_norm(ops.cost()) + qx_norm;
    let primal_scale = 1.0 + inf_norm(ops.b_eq()).max(inf_norm(ops.b_in())).max(inf_norm(x));
    obj_scale += 1.0;
    Residuals {
        rel_dual: inf_norm(&r_dual) / dual_scale,
        rel_primal: inf_norm(&r_eq).max(inf_norm(&r_in)) / primal_scale,
        r_dual,
        r_eq,
        r_in,
        obj_scale,
    }
}

struct Step {
    dx: Vec<f64>,
    dy: Vec<f64>,
    ds: Vec<f64>,
    dlam: Vec<f64>,
    dzl: Vec<f64>,
    dzu: Vec<f64>,
}

struct Scratch {
    rx: Vec<f64>,
    ry: Vec<f64>,
    r_slam: Vec<f64>,
    r_lz: Vec<f64>,
    r_uz: Vec<f64>,
}

impl Scratch {
    fn new(n: usize, n_eq: usize, n_in: usize) -> Self {
        Scratch {
            rx: vec![0.0; n],
            ry: vec![0.0; n_eq],
            r_slam: vec![0.0; n_in],
            r_lz: vec![0.0; n],
            r_uz: vec![0.0; n],
        }
    }
}

struct Scaling<'a> {
    d_in: &'a [f64],
    d_lo: &'a [f64],
    d_up: &'a [f64],
}

/// Apply the exact folded KKT block `H dx + A_eq' dy` with
/// `H = Q + D_bounds + A_in' D_in A_in`.
fn apply_kkt_h<O: QpOps>(ops: &O, scaling: &Scaling, dx: &[f64], dy: &[f64]) -> Vec<f64> {
    let n = ops.nvars();
    let mut out = vec![0.0; n];
    ops.q_mul(dx, &mut out);
    for i in 0..n {
        out[i] += (scaling.d_lo[i] + scaling.d_up[i]) * dx[i];
    }
    let n_in = ops.n_in();
    if n_in > 0 {
        let mut ax = vec![0.0; n_in];
        ops.in_mul(dx, &mut ax);
        for (a, d) in ax.iter_mut().zip(scaling.d_in) {
            *a *= d;
        }
        ops.in_tmul_acc(&ax, &mut out);
    }
    ops.eq_tmul_acc(dy, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn newton_step<O: QpOps>(
    ops: &O,
    res: &Residuals,
    x: &[f64],
    s: &[f64],
    lam: &[f64],
    zl: &[f64],
    zu: &[f64],
    lower: &[f64],
    upper: &[f64],
    fin_lo: &[usize],
    fin_up: &[usize],
    scaling: &Scaling,
    center: Option<(f64, &Step)>,
    scratch: &mut Scratch,
) -> Result<Step> {
    let n = ops.nvars();
    let n_eq = ops.n_eq();
    let n_in = ops.n_in();

    let r_slam = &mut scratch.r_slam;
    let r_lz = &mut scratch.r_lz;
    let r_uz = &mut scratch.r_uz;
    for r in 0..n_in {
        r_slam[r] = s[r] * lam[r];
    }
    r_lz.fill(0.0);
    r_uz.fill(0.0);
    for &i in fin_lo {
        r_lz[i] = (x[i] - lower[i]) * zl[i];
    }
    for &i in fin_up {
        r_uz[i] = (upper[i] - x[i]) * zu[i];
    }
    if let Some((sigma_mu, aff)) = center {
        for r in 0..n_in {
            r_slam[r] += aff.ds[r] * aff.dlam[r] - sigma_mu;
        }
        for &i in fin_lo {
            r_lz[i] += aff.dx[i] * aff.dzl[i] - sigma_mu;
        }
        for &i in fin_up {
            r_uz[i] += -aff.dx[i] * aff.dzu[i] - sigma_mu;
        }
    }

    let rx = &mut scratch.rx;
    for i in 0..n {
        rx[i] = -res.r_dual[i];
    }
    if n_in > 0 {
        let mut tmp = vec![0.0; n_in];
        for r in 0..n_in {
            tmp[r] = (lam[r] * res.r_in[r] - r_slam[r]) / s[r];
        }
        let mut acc = vec![0.0; n];
        ops.in_tmul_acc(&tmp, &mut acc);
        for i in 0..n {
            rx[i] -= acc[i];
        }
    }
    for &i in fin_lo {
        rx[i] -= r_lz[i] / (x[i] - lower[i]);
    }
    for &i in fin_up {
        rx[i] += r_uz[i] / (upper[i] - x[i]);
    }
    let ry = &mut scratch.ry;
    for r in 0..n_eq {
        ry[r] = -res.r_eq[r];
    }

    let mut dx = vec![0.0; n];
    let mut dy = vec![0.0; n_eq];
    ops.solve_kkt(rx, ry, &mut dx, &mut dy)?;
    // One pass of iterative refinement against the exact folded system;
    // the factorization may carry regularization bumps.
    {
        let mut hx = apply_kkt_h(ops, scaling, &dx, &dy);
        for i in 0..n {
            hx[i] = rx[i] - hx[i];
        }
        let mut hy = vec![0.0; n_eq];
        if n_eq > 0 {
            ops.eq_mul(&dx, &mut hy);
            for r in 0..n_eq {
                hy[r] = ry[r] - hy[r];
            }
        }
        let mut cx = vec![0.0; n];
        let mut cy = vec![0.0; n_eq];
        if ops.solve_kkt(&hx, &hy, &mut cx, &mut cy).is_ok() {
            for i in 0..n {
                dx[i] += cx[i];
            }
            for r in 0..n_eq {
                dy[r] += cy[r];
            }
        }
    }

    let mut ds = vec![0.0; n_in];
    let mut dlam = vec![0.0; n_in];
    if n_in > 0 {
        let mut ain_dx = vec![0.0; n_in];
        ops.in_mul(&dx, &mut ain_dx);
        for r in 0..n_in {
            ds[r] = -res.r_in[r] - ain_dx[r];
            dlam[r] = -(lam[r] * ds[r] + r_slam[r]) / s[r];
        }
    }
    let mut dzl = vec![0.0; n];
    let mut dzu = vec![0.0; n];
    for &i in fin_lo {
        dzl[i] = -(zl[i] * dx[i] + r_lz[i]) / (x[i] - lower[i]);
    }
    for &i in fin_up {
        dzu[i] = (zu[i] * dx[i] - r_uz[i]) / (upper[i] - x[i]);
    }
    Ok(Step {
        dx,
        dy,
        ds,
        dlam,
        dzl,
        dzu,
    })
}

#[allow(clippy::too_many_arguments)]
fn max_steps(
    x: &[f64],
    s: &[f64],
    lam: &[f64],
    zl: &[f64],
    zu: &[f64],
    lower: &[f64],
    upper: &[f64],
    fin_lo: &[usize],
    fin_up: &[usize],
    step: &Step,
    eta: f64,
) -> (f64, f64) {
    let mut ap = 1.0f64;
    let mut ad = 1.0f64;
    for r in 0..s.len() {
        if step.ds[r] < 0.0 {
            ap = ap.min(-eta * s[r] / step.ds[r]);
        }
        if step.dlam[r] < 0.0 {
            ad = ad.min(-eta * lam[r] / step.dlam[r]);
        }
    }
    for &i in fin_lo {
        if step.dx[i] < 0.0 {
            ap = ap.min(-eta * (x[i] - lower[i]) / step.dx[i]);
        }
        if step.dzl[i] < 0.0 {
            ad = ad.min(-eta * zl[i] / step.dzl[i]);
        }
    }
    for &i in fin_up {
        if step.dx[i] > 0.0 {
            ap = ap.min(eta * (upper[i] - x[i]) / step.dx[i]);
        }
        if step.dzu[i] < 0.0 {
            ad = ad.min(-eta * zu[i] / step.dzu[i]);
        }
    }
    (ap.max(0.0), ad.max(0.0))
}

/// Pure equality-constrained case: one KKT solve.
fn equality_newton<O: QpOps>(
    ops: &mut O,
    x: &mut Vec<f64>,
    y: &mut Vec<f64>,
    tol: f64,
) -> Result<IpmReport> {
    let n = ops.nvars();
    let n_eq = ops.n_eq();
    let d = vec![0.0; n];
    ops.factor(&[], &d, &d)?;
    let mut rx = vec![0.0; n];
    ops.q_mul(x, &mut rx);
    for i in 0..n {
        rx[i] = -(rx[i] + ops.cost()[i]);
    }
    let mut ry = vec![0.0; n_eq];
    ops.eq_mul(x, &mut ry);
    for r in 0..n_eq {
        ry[r] = ops.b_eq()[r] - ry[r];
    }
    let mut dx = vec![0.0; n];
    let mut dy = vec![0.0; n_eq];
    ops.solve_kkt(&rx, &ry, &mut dx, &mut dy)?;
    for i in 0..n {
        x[i] += dx[i];
    }
    for r in 0..n_eq {
        y[r] += dy[r];
    }
    let res = residuals(ops, x, y, &[], &[], &[], &[], &[], &[]);
    let kkt = res.rel_dual.max(res.rel_primal);
    Ok(IpmReport {
        status: if kkt <= tol.max(ACCEPT_TOL) {
            QpStatus::Optimal
        } else {
            QpStatus::NumericalFailure
        },
        x: x.clone(),
        y: y.clone(),
        lam: vec![],
        kkt_residual: kkt,
        iterations: 1,
    })
}
