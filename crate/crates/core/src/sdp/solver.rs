//! Primal-dual path-following interior-point solver for block SDPs.
//!
//! The public model (PSD blocks, free scalars, equalities, boxes) is first
//! normalized to an internal equality-only standard form
//!
//! ```text
//! min  sum_b <C_b, X_b> + c_w' w + c_s' s
//! s.t. sum_b <A_ib, X_b> + a_iw' w + a_is' s = b_i      (i = 1..p)
//!      X_b >= 0 (PSD),  w >= 0 (box slacks),  s free
//! ```
//!
//! Each finite box side contributes one row and one nonnegative slack, so a
//! box's two dual multipliers come out with their natural signs (the lower
//! row's multiplier is forced >= 0 by the slack's reduced cost, the upper
//! row's <= 0) and no PSD lifting is needed. Search directions use the symmetrized HKM linearization with
//! Mehrotra predictor-corrector steps; the dense Schur complement is solved
//! by Cholesky with diagonal regularization, with free variables eliminated
//! through a second small Schur complement.

use super::model::{BlockSdpProblem, SdpError};
use crate::linalg::chol::Cholesky;
use crate::linalg::{sym_eig, SymMatrix};

/// Termination state of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    PrimalInfeasibleDetected,
    DualInfeasibleDetected,
    MaxIterations,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub gap_tol: f64,
    pub feas_tol: f64,
    /// Largest admissible objective perturbation when repairing a dual point
    /// into a certified bound.
    pub repair_tol: f64,
    pub max_iterations: usize,
    pub step_fraction: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            repair_tol: 1e-4,
            max_iterations: 200,
            step_fraction: 0.98,
        }
    }
}

/// Solver output: primal/dual iterates mapped back onto the public model.
#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub primal_blocks: Vec<SymMatrix>,
    pub scalar_values: Vec<f64>,
    /// One multiplier per public equality.
    pub dual_equality_multipliers: Vec<f64>,
    /// `(t1 >= 0, t2 <= 0)` per public box.
    pub dual_box_multipliers: Vec<(f64, f64)>,
    /// Dual slack iterate per block (interior, PSD).
    pub dual_slack: Vec<SymMatrix>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// Weak-duality bound from the repaired dual point; `-inf` when the
    /// repair failed or the solve did not reach optimality.
    pub certified_lower_bound: f64,
    pub iterations: usize,
    /// Achieved relative primal feasibility residual.
    pub primal_residual: f64,
    /// Achieved relative dual feasibility residual.
    pub dual_residual: f64,
}

impl SdpSolution {
    /// Relative duality gap of the returned iterate.
    pub fn relative_gap(&self) -> f64 {
        (self.primal_objective - self.dual_objective).abs()
            / (1.0 + self.primal_objective.abs() + self.dual_objective.abs())
    }
}

/// Sparse symmetric coefficient matrix in the elementary-matrix convention:
/// entry `(i, j, v)` with `i <= j` stands for `v` at both `(i,j)` and `(j,i)`.
#[derive(Debug, Clone, Default)]
pub(crate) struct SparseSym(pub(crate) Vec<(usize, usize, f64)>);

impl SparseSym {
    pub(crate) fn inner_dense(&self, x: &[f64], n: usize) -> f64 {
        let mut acc = 0.0;
        for &(i, j, v) in &self.0 {
            acc += if i == j {
                v * x[i * n + i]
            } else {
                2.0 * v * x[i * n + j]
            };
        }
        acc
    }

    pub(crate) fn add_to_dense(&self, x: &mut [f64], n: usize, scale: f64) {
        for &(i, j, v) in &self.0 {
            x[i * n + j] += scale * v;
            if i != j {
                x[j * n + i] += scale * v;
            }
        }
    }

    /// `G += scale * X * A` for dense row-major `x` (n x n), sparse `A = self`.
    fn accumulate_left_product(&self, x: &[f64], g: &mut [f64], n: usize, scale: f64) {
        for &(k, c, v) in &self.0 {
            for r in 0..n {
                g[r * n + c] += scale * v * x[r * n + k];
            }
            if k != c {
                for r in 0..n {
                    g[r * n + k] += scale * v * x[r * n + c];
                }
            }
        }
    }
}

/// Where a public box landed in the internal row set.
#[derive(Debug, Clone, Copy)]
pub(crate) enum BoxRows {
    /// Degenerate box `l == u`, kept as one equality row.
    Equality(usize),
    Lower(usize),
    Upper(usize),
    Both {
        lower: usize,
        upper: usize,
    },
    /// Both sides infinite.
    Free,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct InternalRow {
    pub(crate) blocks: Vec<(usize, SparseSym)>,
    pub(crate) lp: Vec<(usize, f64)>,
    pub(crate) free: Vec<(usize, f64)>,
}

pub(crate) struct InternalForm {
    pub(crate) block_dims: Vec<usize>,
    pub(crate) n_lp: usize,
    pub(crate) n_free: usize,
    pub(crate) rows: Vec<InternalRow>,
    pub(crate) rhs: Vec<f64>,
    pub(crate) cost_blocks: Vec<SparseSym>,
    pub(crate) cost_lp: Vec<f64>,
    pub(crate) cost_free: Vec<f64>,
    pub(crate) obj_const: f64,
    pub(crate) eq_rows: Vec<usize>,
    pub(crate) box_rows: Vec<BoxRows>,
}

fn expr_to_row(expr: &super::model::LinExpr, n_blocks: usize, row: &mut InternalRow) {
    let mut per_block: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); n_blocks];
    for &(b, i, j, v) in &expr.block_terms {
        per_block[b].push((i, j, v));
    }
    for (b, mut entries) in per_block.into_iter().enumerate() {
        if entries.is_empty() {
            continue;
        }
        // merge duplicates
        entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (i, j, v) in entries {
            if let Some(last) = merged.last_mut() {
                if last.0 == i && last.1 == j {
                    last.2 += v;
                    continue;
                }
            }
            merged.push((i, j, v));
        }
        merged.retain(|e| e.2 != 0.0);
        if !merged.is_empty() {
            row.blocks.push((b, SparseSym(merged)));
        }
    }
    let mut sc: Vec<(usize, f64)> = expr.scalar_terms.clone();
    sc.sort_unstable_by_key(|&(s, _)| s);
    for (s, v) in sc {
        if let Some(last) = row.free.last_mut() {
            if last.0 == s {
                last.1 += v;
                continue;
            }
        }
        row.free.push((s, v));
    }
    row.free.retain(|e| e.1 != 0.0);
}

pub(crate) fn normalize(p: &BlockSdpProblem) -> Result<InternalForm, SdpError> {
    p.validate()?;
    let n_blocks = p.block_dims.len();
    let obj = p.objective.as_ref().expect("validated");

    let mut cost_row = InternalRow::default();
    expr_to_row(obj, n_blocks, &mut cost_row);
    let mut cost_blocks: Vec<SparseSym> = (0..n_blocks).map(|_| SparseSym::default()).collect();
    for (b, sp) in cost_row.blocks {
        cost_blocks[b] = sp;
    }
    let mut cost_free = vec![0.0; p.scalar_names.len()];
    for (s, v) in cost_row.free {
        cost_free[s] = v;
    }

    let mut form = InternalForm {
        block_dims: p.block_dims.clone(),
        n_lp: 0,
        n_free: p.scalar_names.len(),
        rows: Vec::new(),
        rhs: Vec::new(),
        cost_blocks,
        cost_lp: Vec::new(),
        cost_free,
        obj_const: obj.constant,
        eq_rows: Vec::new(),
        box_rows: Vec::new(),
    };

    for (expr, rhs) in &p.equalities {
        let mut row = InternalRow::default();
        expr_to_row(expr, n_blocks, &mut row);
        form.rows.push(row);
        form.rhs.push(*rhs);
        form.eq_rows.push(form.rows.len() - 1);
    }

    for (expr, lo, hi) in &p.boxes {
        let lo_fin = lo.is_finite();
        let hi_fin = hi.is_finite();
        let placement = if !lo_fin && !hi_fin {
            BoxRows::Free
        } else if lo_fin && hi_fin && lo == hi {
            let mut row = InternalRow::default();
            expr_to_row(expr, n_blocks, &mut row);
            form.rows.push(row);
            form.rhs.push(*lo);
            BoxRows::Equality(form.rows.len() - 1)
        } else {
            let mut lower = None;
            let mut upper = None;
            if lo_fin {
                let mut row = InternalRow::default();
                expr_to_row(expr, n_blocks, &mut row);
                let slack = form.n_lp;
                form.n_lp += 1;
                form.cost_lp.push(0.0);
                row.lp.push((slack, -1.0));
                form.rows.push(row);
                form.rhs.push(*lo);
                lower = Some(form.rows.len() - 1);
            }
            if hi_fin {
                let mut row = InternalRow::default();
                expr_to_row(expr, n_blocks, &mut row);
                let slack = form.n_lp;
                form.n_lp += 1;
                form.cost_lp.push(0.0);
                row.lp.push((slack, 1.0));
                form.rows.push(row);
                form.rhs.push(*hi);
                upper = Some(form.rows.len() - 1);
            }
            match (lower, upper) {
                (Some(l), Some(u)) => BoxRows::Both { lower: l, upper: u },
                (Some(l), None) => BoxRows::Lower(l),
                (None, Some(u)) => BoxRows::Upper(u),
                (None, None) => unreachable!(),
            }
        };
        form.box_rows.push(placement);
    }

    Ok(form)
}

// ---------------------------------------------------------------------------
// dense helpers on row-major n x n buffers
// ---------------------------------------------------------------------------

fn dense_identity(n: usize, scale: f64) -> Vec<f64> {
    let mut x = vec![0.0; n * n];
    for i in 0..n {
        x[i * n + i] = scale;
    }
    x
}

fn dense_inner(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dense_matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            let row = &b[k * n..(k + 1) * n];
            let out = &mut c[i * n..(i + 1) * n];
            for (cv, bv) in out.iter_mut().zip(row) {
                *cv += aik * bv;
            }
        }
    }
    c
}

fn dense_symmetrize(a: &mut [f64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = avg;
            a[j * n + i] = avg;
        }
    }
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Largest step `alpha` keeping `X + alpha D` positive semidefinite, for
/// `X` positive definite; `f64::INFINITY` when the direction is PSD.
fn psd_max_step(x: &[f64], d: &[f64], n: usize) -> f64 {
    let chol = match Cholesky::factor_dense(n, x) {
        Ok(c) => c,
        Err(_) => return 0.0,
    };
    // M = L^-1 D L^-T, column by column.
    let mut m = vec![0.0; n * n];
    let mut col = vec![0.0; n];
    // First W = L^-1 D (forward solve on each column of D).
    let mut w = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            col[i] = d[i * n + j];
        }
        chol.forward_vec(&mut col);
        for i in 0..n {
            w[i * n + j] = col[i];
        }
    }
    // Then M = W L^-T, i.e. M' = L^-1 W' (forward solve on rows of W).
    for i in 0..n {
        for j in 0..n {
            col[j] = w[i * n + j];
        }
        chol.forward_vec(&mut col);
        for j in 0..n {
            m[i * n + j] = col[j];
        }
    }
    dense_symmetrize(&mut m, n);
    let sym = SymMatrix::from_fn(n, |i, j| m[i * n + j]);
    let lam = match sym_eig(&sym) {
        Ok(e) => *e.values.last().unwrap(),
        Err(_) => return 0.0,
    };
    if lam >= -1e-13 {
        f64::INFINITY
    } else {
        -1.0 / lam
    }
}

fn lp_max_step(w: &[f64], d: &[f64]) -> f64 {
    let mut a = f64::INFINITY;
    for (wi, di) in w.iter().zip(d) {
        if *di < 0.0 {
            a = a.min(-wi / di);
        }
    }
    a
}

// ---------------------------------------------------------------------------
// solver core
// ---------------------------------------------------------------------------

#[derive(Clone)]
struct Iterate {
    x: Vec<Vec<f64>>,
    s: Vec<Vec<f64>>,
    w: Vec<f64>,
    z: Vec<f64>,
    free: Vec<f64>,
    y: Vec<f64>,
}

struct StepData {
    /// Per block: inverse of S.
    s_inv: Vec<Vec<f64>>,
    /// Unregularized dense Schur complement, kept for iterative refinement.
    m_dense: Vec<f64>,
    /// Columns of A_f (free-variable coefficients per row).
    af_cols: Vec<Vec<f64>>,
    /// Cholesky factor of the regularized Schur complement.
    schur: Cholesky,
    /// Columns of `M^-1 A_f` for free-variable elimination.
    minv_af: Vec<Vec<f64>>,
    /// Cholesky of the free-variable Schur complement.
    free_schur: Option<Cholesky>,
}

impl StepData {
    /// One pass of the block-eliminated saddle solve
    /// `[M A_f; A_f' 0] (dy, ds) = (h, rf)` using the cached factors.
    fn saddle_once(&self, h: &[f64], rf: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let p = h.len();
        let nf = rf.len();
        let mut dy = h.to_vec();
        self.schur.solve_vec(&mut dy);
        let mut ds = vec![0.0; nf];
        if nf > 0 {
            let mut rhs = vec![0.0; nf];
            for k in 0..nf {
                rhs[k] = dense_inner(&self.af_cols[k], &dy) - rf[k];
            }
            if let Some(fs) = &self.free_schur {
                fs.solve_vec(&mut rhs);
            }
            ds = rhs;
            for (k, col) in self.minv_af.iter().enumerate() {
                for i in 0..p {
                    dy[i] -= col[i] * ds[k];
                }
            }
        }
        (dy, ds)
    }

    /// Saddle solve with two rounds of iterative refinement against the
    /// unregularized system; the regularized factor acts as preconditioner.
    fn saddle_solve(&self, h: &[f64], rf: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let p = h.len();
        let nf = rf.len();
        let (mut dy, mut ds) = self.saddle_once(h, rf);
        for _ in 0..2 {
            let mut res_y = h.to_vec();
            for i in 0..p {
                res_y[i] -= dense_inner(&self.m_dense[i * p..(i + 1) * p], &dy);
                for (k, col) in self.af_cols.iter().enumerate() {
                    res_y[i] -= col[i] * ds[k];
                }
            }
            let mut res_s = rf.to_vec();
            for k in 0..nf {
                res_s[k] -= dense_inner(&self.af_cols[k], &dy);
            }
            let (cy, cs) = self.saddle_once(&res_y, &res_s);
            for i in 0..p {
                dy[i] += cy[i];
            }
            for k in 0..nf {
                ds[k] += cs[k];
            }
        }
        (dy, ds)
    }
}

struct Direction {
    dx: Vec<Vec<f64>>,
    ds: Vec<Vec<f64>>,
    dw: Vec<f64>,
    dz: Vec<f64>,
    dfree: Vec<f64>,
    dy: Vec<f64>,
}

pub(crate) struct RawSolution {
    pub status: SdpStatus,
    pub x: Vec<Vec<f64>>,
    pub s: Vec<Vec<f64>>,
    pub w: Vec<f64>,
    pub z: Vec<f64>,
    pub free: Vec<f64>,
    pub y: Vec<f64>,
    pub iterations: usize,
}

impl InternalForm {
    fn row_value(&self, i: usize, it: &Iterate) -> f64 {
        let row = &self.rows[i];
        let mut v = 0.0;
        for (b, sp) in &row.blocks {
            v += sp.inner_dense(&it.x[*b], self.block_dims[*b]);
        }
        for &(l, a) in &row.lp {
            v += a * it.w[l];
        }
        for &(k, a) in &row.free {
            v += a * it.free[k];
        }
        v
    }

    fn primal_objective(&self, it: &Iterate) -> f64 {
        let mut v = self.obj_const;
        for b in 0..self.block_dims.len() {
            v += self.cost_blocks[b].inner_dense(&it.x[b], self.block_dims[b]);
        }
        v += dense_inner(&self.cost_lp, &it.w);
        v += dense_inner(&self.cost_free, &it.free);
        v
    }

    fn dual_objective(&self, y: &[f64]) -> f64 {
        self.obj_const + dense_inner(&self.rhs, y)
    }

    /// `C_b - sum_i y_i A_ib` as a dense matrix.
    pub(crate) fn dual_slack_from_y(&self, b: usize, y: &[f64]) -> Vec<f64> {
        let n = self.block_dims[b];
        let mut s = vec![0.0; n * n];
        self.cost_blocks[b].add_to_dense(&mut s, n, 1.0);
        for (i, row) in self.rows.iter().enumerate() {
            if y[i] == 0.0 {
                continue;
            }
            for (bb, sp) in &row.blocks {
                if *bb == b {
                    sp.add_to_dense(&mut s, n, -y[i]);
                }
            }
        }
        s
    }

    fn residuals(&self, it: &Iterate) -> Residuals {
        let p = self.rows.len();
        let mut r_p = vec![0.0; p];
        for i in 0..p {
            r_p[i] = self.rhs[i] - self.row_value(i, it);
        }
        let mut r_d = Vec::with_capacity(self.block_dims.len());
        for b in 0..self.block_dims.len() {
            let n = self.block_dims[b];
            let mut m = self.dual_slack_from_y(b, &it.y);
            for (mv, sv) in m.iter_mut().zip(&it.s[b]) {
                *mv -= sv;
            }
            let _ = n;
            r_d.push(m);
        }
        let mut r_z = self.cost_lp.clone();
        let mut r_f = self.cost_free.clone();
        for (i, row) in self.rows.iter().enumerate() {
            for &(l, a) in &row.lp {
                r_z[l] -= a * it.y[i];
            }
            for &(k, a) in &row.free {
                r_f[k] -= a * it.y[i];
            }
        }
        for (rv, zv) in r_z.iter_mut().zip(&it.z) {
            *rv -= zv;
        }
        Residuals { r_p, r_d, r_z, r_f }
    }
}

struct Residuals {
    r_p: Vec<f64>,
    r_d: Vec<Vec<f64>>,
    r_z: Vec<f64>,
    r_f: Vec<f64>,
}

pub(crate) fn solve_internal(
    form: &InternalForm,
    opts: &SolverOptions,
) -> Result<RawSolution, SdpError> {
    let nb = form.block_dims.len();
    let p = form.rows.len();

    // Degenerate: no cone variables at all.
    if nb == 0 && form.n_lp == 0 {
        return solve_linear_only(form, opts);
    }

    let b_scale = 1.0 + max_abs(&form.rhs);
    let c_scale = {
        let mut m = max_abs(&form.cost_lp).max(max_abs(&form.cost_free));
        for sp in &form.cost_blocks {
            for &(_, _, v) in &sp.0 {
                m = m.max(v.abs());
            }
        }
        1.0 + m
    };
    let tau_p = b_scale;
    let tau_d = b_scale + c_scale;

    let mut it = Iterate {
        x: form
            .block_dims
            .iter()
            .map(|&n| dense_identity(n, tau_p))
            .collect(),
        s: form
            .block_dims
            .iter()
            .map(|&n| dense_identity(n, tau_d))
            .collect(),
        w: vec![tau_p; form.n_lp],
        z: vec![tau_d; form.n_lp],
        free: vec![0.0; form.n_free],
        y: vec![0.0; p],
    };

    let cone_size: f64 = form.block_dims.iter().sum::<usize>() as f64 + form.n_lp as f64;
    let mut tiny_step_streak = 0usize;
    let mut best: Option<(f64, Iterate)> = None;
    let mut iters_since_improve = 0usize;

    for iter in 0..opts.max_iterations {
        let res = form.residuals(&it);
        let p_obj = form.primal_objective(&it);
        let d_obj = form.dual_objective(&it.y);

        let mut compl = dense_inner(&it.w, &it.z);
        for b in 0..nb {
            compl += dense_inner(&it.x[b], &it.s[b]);
        }
        let mu = compl / cone_size;

        let rel_p = max_abs(&res.r_p) / b_scale;
        let rel_d = {
            let mut m = max_abs(&res.r_z).max(max_abs(&res.r_f));
            for rd in &res.r_d {
                m = m.max(max_abs(rd));
            }
            m / c_scale
        };
        let gap_rel = (p_obj - d_obj).abs() / (1.0 + p_obj.abs() + d_obj.abs());
        let score = rel_p.max(rel_d).max(gap_rel);

        if std::env::var("RANKSDP_IPM_TRACE").is_ok() {
            eprintln!(
                "it={iter} mu={mu:.3e} rel_p={rel_p:.3e} rel_d={rel_d:.3e} gap={gap_rel:.3e} p={p_obj:.9e} d={d_obj:.9e}"
            );
        }
        if rel_p <= opts.feas_tol && rel_d <= opts.feas_tol && gap_rel <= opts.gap_tol {
            return Ok(RawSolution {
                status: SdpStatus::Optimal,
                x: it.x,
                s: it.s,
                w: it.w,
                z: it.z,
                free: it.free,
                y: it.y,
                iterations: iter,
            });
        }

        match &mut best {
            Some((bs, snap)) if score < *bs * 0.98 => {
                *bs = score;
                *snap = it.clone();
                iters_since_improve = 0;
            }
            Some(_) => iters_since_improve += 1,
            None => best = Some((score, it.clone())),
        }

        // Divergence-based infeasibility detection.
        let infeas_tol = opts.feas_tol.sqrt();
        if iter >= 5 {
            if d_obj > 1.0 / opts.feas_tol && rel_d <= infeas_tol {
                return Ok(RawSolution {
                    status: SdpStatus::PrimalInfeasibleDetected,
                    x: it.x,
                    s: it.s,
                    w: it.w,
                    z: it.z,
                    free: it.free,
                    y: it.y,
                    iterations: iter,
                });
            }
            if p_obj < -1.0 / opts.feas_tol && rel_p <= infeas_tol {
                return Ok(RawSolution {
                    status: SdpStatus::DualInfeasibleDetected,
                    x: it.x,
                    s: it.s,
                    w: it.w,
                    z: it.z,
                    free: it.free,
                    y: it.y,
                    iterations: iter,
                });
            }
        }

        if !mu.is_finite() || mu < 0.0 {
            return Ok(exhausted(best, it, iter, true));
        }
        // Numerical floor: no meaningful progress for a stretch, return the
        // best iterate seen instead of grinding to the iteration cap.
        if iters_since_improve >= 12 {
            return Ok(exhausted(best, it, iter, false));
        }

        let step = match prepare_step(form, &it) {
            Some(s) => s,
            None => return Ok(exhausted(best, it, iter, true)),
        };

        // Predictor: aim straight at complementarity zero.
        let rc_pred: Vec<Vec<f64>> =
            it.x.iter()
                .map(|x| x.iter().map(|v| -v).collect())
                .collect();
        let k_pred: Vec<f64> = it.w.iter().map(|v| -v).collect();
        let aff = match solve_direction(form, &it, &step, &res, &rc_pred, &k_pred) {
            Some(d) => d,
            None => return Ok(exhausted(best, it, iter, true)),
        };

        let (ap_aff, ad_aff) = step_lengths(form, &it, &aff, 1.0);
        let mu_aff = {
            let mut acc = 0.0;
            for b in 0..nb {
                let n = form.block_dims[b];
                let mut xa = it.x[b].clone();
                let mut sa = it.s[b].clone();
                for (v, d) in xa.iter_mut().zip(&aff.dx[b]) {
                    *v += ap_aff * d;
                }
                for (v, d) in sa.iter_mut().zip(&aff.ds[b]) {
                    *v += ad_aff * d;
                }
                acc += dense_inner(&xa, &sa);
                let _ = n;
            }
            for l in 0..form.n_lp {
                acc += (it.w[l] + ap_aff * aff.dw[l]) * (it.z[l] + ad_aff * aff.dz[l]);
            }
            (acc / cone_size).max(0.0)
        };
        let sigma = if mu > 0.0 {
            ((mu_aff / mu).powi(3)).clamp(1e-8, 1.0)
        } else {
            0.0
        };

        // Corrector: recenter and subtract second-order term.
        let mut rc_corr = Vec::with_capacity(nb);
        for b in 0..nb {
            let n = form.block_dims[b];
            // sigma*mu*S^-1 - X - dXa dSa S^-1
            let prod = dense_matmul(&aff.dx[b], &aff.ds[b], n);
            let prod = dense_matmul(&prod, &step.s_inv[b], n);
            let mut rc = vec![0.0; n * n];
            for idx in 0..n * n {
                rc[idx] = sigma * mu * step.s_inv[b][idx] - it.x[b][idx] - prod[idx];
            }
            rc_corr.push(rc);
        }
        let mut k_corr = vec![0.0; form.n_lp];
        for l in 0..form.n_lp {
            k_corr[l] = (sigma * mu - aff.dw[l] * aff.dz[l]) / it.z[l] - it.w[l];
        }
        let dir = match solve_direction(form, &it, &step, &res, &rc_corr, &k_corr) {
            Some(d) => d,
            None => return Ok(exhausted(best, it, iter, true)),
        };

        let (ap, ad) = step_lengths(form, &it, &dir, opts.step_fraction);
        if ap < 1e-10 && ad < 1e-10 {
            tiny_step_streak += 1;
            if tiny_step_streak >= 3 {
                return Ok(exhausted(best, it, iter, false));
            }
        } else {
            tiny_step_streak = 0;
        }

        for b in 0..nb {
            for (v, d) in it.x[b].iter_mut().zip(&dir.dx[b]) {
                *v += ap * d;
            }
            for (v, d) in it.s[b].iter_mut().zip(&dir.ds[b]) {
                *v += ad * d;
            }
            let n = form.block_dims[b];
            dense_symmetrize(&mut it.x[b], n);
            dense_symmetrize(&mut it.s[b], n);
        }
        for l in 0..form.n_lp {
            it.w[l] += ap * dir.dw[l];
            it.z[l] += ad * dir.dz[l];
        }
        for (v, d) in it.free.iter_mut().zip(&dir.dfree) {
            *v += ap * d;
        }
        for (v, d) in it.y.iter_mut().zip(&dir.dy) {
            *v += ad * d;
        }
    }

    let iterations = opts.max_iterations;
    Ok(exhausted(best, it, iterations, false))
}

/// No more progress is possible: hand back the best-scored iterate. A hard
/// breakdown (`broken`) with nothing decent banked is a numerical failure;
/// a stall near the optimum reports as iteration exhaustion.
fn exhausted(
    best: Option<(f64, Iterate)>,
    last: Iterate,
    iter: usize,
    broken: bool,
) -> RawSolution {
    let (score, it) = match best {
        Some((s, snap)) => (s, snap),
        None => (f64::INFINITY, last),
    };
    let status = if broken && score > 1e-4 {
        SdpStatus::NumericalFailure
    } else {
        SdpStatus::MaxIterations
    };
    RawSolution {
        status,
        x: it.x,
        s: it.s,
        w: it.w,
        z: it.z,
        free: it.free,
        y: it.y,
        iterations: iter,
    }
}

/// Pure linear problem (free variables and equalities only): solve the
/// KKT system directly.
fn solve_linear_only(form: &InternalForm, _opts: &SolverOptions) -> Result<RawSolution, SdpError> {
    let p = form.rows.len();
    let nf = form.n_free;
    // minimize c's  s.t.  A s = b; KKT: [0 A'; A 0][s; y] = [c; b], solved
    // via regularized normal equations on the stacked system.
    let dim = nf + p;
    let mut kkt = vec![0.0; dim * dim];
    for (i, row) in form.rows.iter().enumerate() {
        for &(k, a) in &row.free {
            kkt[k * dim + nf + i] = a;
            kkt[(nf + i) * dim + k] = a;
        }
    }
    for d in 0..dim {
        kkt[d * dim + d] += if d < nf { 1e-10 } else { -1e-10 };
    }
    // Solve by least squares through the normal equations of the symmetric
    // quasi-definite system: K z = rhs with K'K Cholesky.
    let mut rhs = vec![0.0; dim];
    rhs[..nf].copy_from_slice(&form.cost_free);
    rhs[nf..].copy_from_slice(&form.rhs);
    let mut ktk = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            let mut acc = 0.0;
            for k in 0..dim {
                acc += kkt[k * dim + i] * kkt[k * dim + j];
            }
            ktk[i * dim + j] = acc + if i == j { 1e-14 } else { 0.0 };
        }
    }
    let mut ktr = vec![0.0; dim];
    for i in 0..dim {
        let mut acc = 0.0;
        for k in 0..dim {
            acc += kkt[k * dim + i] * rhs[k];
        }
        ktr[i] = acc;
    }
    let ch = Cholesky::factor_dense(dim, &ktk)
        .map_err(|_| SdpError::Model("degenerate linear-only model".into()))?;
    let mut sol = ktr;
    ch.solve_vec(&mut sol);
    let free = sol[..nf].to_vec();
    let y = sol[nf..].to_vec();
    // Residual check decides between optimal and unbounded/infeasible.
    let mut ok = true;
    for (i, row) in form.rows.iter().enumerate() {
        let mut v = 0.0;
        for &(k, a) in &row.free {
            v += a * free[k];
        }
        if (v - form.rhs[i]).abs() > 1e-6 * (1.0 + form.rhs[i].abs()) {
            ok = false;
        }
    }
    let mut rd = form.cost_free.clone();
    for (i, row) in form.rows.iter().enumerate() {
        for &(k, a) in &row.free {
            rd[k] -= a * y[i];
        }
    }
    let status = if !ok {
        SdpStatus::PrimalInfeasibleDetected
    } else if max_abs(&rd) > 1e-6 * (1.0 + max_abs(&form.cost_free)) {
        SdpStatus::DualInfeasibleDetected
    } else {
        SdpStatus::Optimal
    };
    Ok(RawSolution {
        status,
        x: Vec::new(),
        s: Vec::new(),
        w: Vec::new(),
        z: Vec::new(),
        free,
        y,
        iterations: 1,
    })
}

/// Factors everything the two direction solves of one iteration share:
/// S inverses, the `sym(X A_i S^-1)` products, the Schur complement, and the
/// free-variable elimination.
fn prepare_step(form: &InternalForm, it: &Iterate) -> Option<StepData> {
    let nb = form.block_dims.len();
    let p = form.rows.len();

    let mut s_inv = Vec::with_capacity(nb);
    for b in 0..nb {
        let n = form.block_dims[b];
        let ch = Cholesky::factor_dense(n, &it.s[b]).ok()?;
        s_inv.push(ch.inverse());
    }

    // T_i per row/block: sym(X A_i S^-1).
    let mut t_mats: Vec<Vec<Vec<f64>>> = Vec::with_capacity(p);
    for row in &form.rows {
        let mut per_block = Vec::with_capacity(row.blocks.len());
        for (b, sp) in &row.blocks {
            let n = form.block_dims[*b];
            let mut g = vec![0.0; n * n];
            sp.accumulate_left_product(&it.x[*b], &mut g, n, 1.0);
            let mut t = dense_matmul(&g, &s_inv[*b], n);
            dense_symmetrize(&mut t, n);
            per_block.push(t);
        }
        t_mats.push(per_block);
    }

    // Schur complement M_ij = sum_b <A_jb, T_ib> + LP diagonal part.
    let mut m = vec![0.0; p * p];
    for i in 0..p {
        let row_i = &form.rows[i];
        for (bi, (b, _)) in row_i.blocks.iter().enumerate() {
            let n = form.block_dims[*b];
            let t = &t_mats[i][bi];
            for j in 0..p {
                // only rows touching the same block contribute
                for (bj, spj) in &form.rows[j].blocks {
                    if bj == b {
                        m[i * p + j] += spj.inner_dense(t, n);
                    }
                }
            }
        }
        for &(l, a) in &row_i.lp {
            let d = it.w[l] / it.z[l];
            for j in 0..p {
                for &(l2, a2) in &form.rows[j].lp {
                    if l2 == l {
                        m[i * p + j] += a * d * a2;
                    }
                }
            }
        }
    }
    dense_symmetrize(&mut m, p);
    let m_dense = m.clone();
    let mut reg = 1e-12 * (1.0 + max_abs(&m));
    let schur = loop {
        let mut mm = m.clone();
        for i in 0..p {
            mm[i * p + i] += reg;
        }
        match Cholesky::factor_dense(p, &mm) {
            Ok(c) => break c,
            Err(_) => {
                reg *= 100.0;
                if reg > 1e-3 * (1.0 + max_abs(&m)) {
                    return None;
                }
            }
        }
    };

    // Free-variable elimination: columns of M^-1 A_f and the small Schur
    // complement A_f' M^-1 A_f.
    let nf = form.n_free;
    let mut minv_af = Vec::with_capacity(nf);
    let mut af_cols: Vec<Vec<f64>> = vec![vec![0.0; p]; nf];
    for (i, row) in form.rows.iter().enumerate() {
        for &(k, a) in &row.free {
            af_cols[k][i] = a;
        }
    }
    let mut free_schur = None;
    if nf > 0 {
        for col in &af_cols {
            let mut v = col.clone();
            schur.solve_vec(&mut v);
            minv_af.push(v);
        }
        let mut fs = vec![0.0; nf * nf];
        for a in 0..nf {
            for b in 0..nf {
                fs[a * nf + b] = dense_inner(&af_cols[a], &minv_af[b]);
            }
        }
        dense_symmetrize(&mut fs, nf);
        let freg = 1e-12 * (1.0 + max_abs(&fs));
        for a in 0..nf {
            fs[a * nf + a] += freg;
        }
        free_schur = Some(Cholesky::factor_dense(nf, &fs).ok()?);
    }

    Some(StepData {
        s_inv,
        m_dense,
        af_cols,
        schur,
        minv_af,
        free_schur,
    })
}

/// One HKM direction solve for a given complementarity target, reusing the
/// iteration's factorizations.
fn solve_direction(
    form: &InternalForm,
    it: &Iterate,
    step: &StepData,
    res: &Residuals,
    rc: &[Vec<f64>],
    k_lp: &[f64],
) -> Option<Direction> {
    let nb = form.block_dims.len();
    let p = form.rows.len();

    // E_b = rc_b - X R_d S^-1 (the dy-independent part of dX, pre-sym).
    let mut e_mats = Vec::with_capacity(nb);
    for b in 0..nb {
        let n = form.block_dims[b];
        let xr = dense_matmul(&it.x[b], &res.r_d[b], n);
        let xrs = dense_matmul(&xr, &step.s_inv[b], n);
        let mut e = rc[b].clone();
        for (ev, v) in e.iter_mut().zip(&xrs) {
            *ev -= v;
        }
        dense_symmetrize(&mut e, n);
        e_mats.push(e);
    }

    // Right-hand side of the Schur system.
    let mut h = vec![0.0; p];
    for (i, row) in form.rows.iter().enumerate() {
        let mut v = res.r_p[i];
        for (b, sp) in &row.blocks {
            v -= sp.inner_dense(&e_mats[*b], form.block_dims[*b]);
        }
        for &(l, a) in &row.lp {
            let d = it.w[l] / it.z[l];
            v -= a * (k_lp[l] - d * res.r_z[l]);
        }
        h[i] = v;
    }

    let (dy, dfree) = step.saddle_solve(&h, &res.r_f);

    // dS = R_d - A*(dy); dX = sym(rc - X dS S^-1).
    let mut ds = Vec::with_capacity(nb);
    let mut dx = Vec::with_capacity(nb);
    for b in 0..nb {
        let n = form.block_dims[b];
        let mut dsb = res.r_d[b].clone();
        for (i, row) in form.rows.iter().enumerate() {
            for (bb, sp) in &row.blocks {
                if *bb == b {
                    sp.add_to_dense(&mut dsb, n, -dy[i]);
                }
            }
        }
        dense_symmetrize(&mut dsb, n);
        let xd = dense_matmul(&it.x[b], &dsb, n);
        let xds = dense_matmul(&xd, &step.s_inv[b], n);
        let mut dxb = rc[b].clone();
        for (v, u) in dxb.iter_mut().zip(&xds) {
            *v -= u;
        }
        dense_symmetrize(&mut dxb, n);
        ds.push(dsb);
        dx.push(dxb);
    }

    let mut dz = res.r_z.clone();
    for (i, row) in form.rows.iter().enumerate() {
        for &(l, a) in &row.lp {
            dz[l] -= a * dy[i];
        }
    }
    let mut dw = vec![0.0; form.n_lp];
    for l in 0..form.n_lp {
        dw[l] = k_lp[l] - (it.w[l] / it.z[l]) * dz[l];
    }

    Some(Direction {
        dx,
        ds,
        dw,
        dz,
        dfree,
        dy,
    })
}

fn step_lengths(form: &InternalForm, it: &Iterate, dir: &Direction, frac: f64) -> (f64, f64) {
    let mut ap = f64::INFINITY;
    let mut ad = f64::INFINITY;
    for b in 0..form.block_dims.len() {
        let n = form.block_dims[b];
        ap = ap.min(psd_max_step(&it.x[b], &dir.dx[b], n));
        ad = ad.min(psd_max_step(&it.s[b], &dir.ds[b], n));
    }
    ap = ap.min(lp_max_step(&it.w, &dir.dw));
    ad = ad.min(lp_max_step(&it.z, &dir.dz));
    ((frac * ap).min(1.0), (frac * ad).min(1.0))
}

// ---------------------------------------------------------------------------
// public entry point
// ---------------------------------------------------------------------------

/// Solves a block SDP with default-constructed or caller-supplied options.
pub fn solve(p: &BlockSdpProblem, opts: &SolverOptions) -> Result<SdpSolution, SdpError> {
    let form = normalize(p)?;
    let raw = solve_internal(&form, opts)?;
    let mut sol = assemble_solution(p, &form, raw);
    // A stalled-but-tight iterate still carries a repairable dual point.
    if matches!(sol.status, SdpStatus::Optimal | SdpStatus::MaxIterations) {
        sol.certified_lower_bound = super::bound::certified_lower_bound(&sol, p, opts.repair_tol)
            .unwrap_or(f64::NEG_INFINITY);
    }
    Ok(sol)
}

fn assemble_solution(p: &BlockSdpProblem, form: &InternalForm, raw: RawSolution) -> SdpSolution {
    let blocks: Vec<SymMatrix> = raw
        .x
        .iter()
        .zip(&form.block_dims)
        .map(|(x, &n)| SymMatrix::from_fn(n, |i, j| 0.5 * (x[i * n + j] + x[j * n + i])))
        .collect();
    let slack: Vec<SymMatrix> = raw
        .s
        .iter()
        .zip(&form.block_dims)
        .map(|(s, &n)| SymMatrix::from_fn(n, |i, j| 0.5 * (s[i * n + j] + s[j * n + i])))
        .collect();

    let dual_eq: Vec<f64> = form.eq_rows.iter().map(|&r| raw.y[r]).collect();
    let dual_boxes: Vec<(f64, f64)> = form
        .box_rows
        .iter()
        .map(|br| match br {
            BoxRows::Equality(r) => {
                let v = raw.y[*r];
                (v.max(0.0), v.min(0.0))
            }
            BoxRows::Lower(r) => (raw.y[*r].max(0.0), 0.0),
            BoxRows::Upper(r) => (0.0, raw.y[*r].min(0.0)),
            BoxRows::Both { lower, upper } => (raw.y[*lower].max(0.0), raw.y[*upper].min(0.0)),
            BoxRows::Free => (0.0, 0.0),
        })
        .collect();

    let it = Iterate {
        x: raw.x,
        s: raw.s,
        w: raw.w,
        z: raw.z,
        free: raw.free,
        y: raw.y,
    };
    let primal_objective = form.primal_objective(&it);
    let dual_objective = form.dual_objective(&it.y);
    let res = form.residuals(&it);
    let b_scale = 1.0 + max_abs(&form.rhs);
    let c_scale = {
        let mut m = max_abs(&form.cost_lp).max(max_abs(&form.cost_free));
        for sp in &form.cost_blocks {
            for &(_, _, v) in &sp.0 {
                m = m.max(v.abs());
            }
        }
        1.0 + m
    };
    let primal_residual = max_abs(&res.r_p) / b_scale;
    let dual_residual = {
        let mut m = max_abs(&res.r_z).max(max_abs(&res.r_f));
        for rd in &res.r_d {
            m = m.max(max_abs(rd));
        }
        m / c_scale
    };

    let _ = p;
    SdpSolution {
        status: raw.status,
        primal_blocks: blocks,
        scalar_values: it.free,
        dual_equality_multipliers: dual_eq,
        dual_box_multipliers: dual_boxes,
        dual_slack: slack,
        primal_objective,
        dual_objective,
        certified_lower_bound: f64::NEG_INFINITY,
        iterations: raw.iterations,
        primal_residual,
        dual_residual,
    }
}
