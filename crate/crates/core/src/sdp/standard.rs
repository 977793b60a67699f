//! Single-block standard form: compilation of the structured block models
//! into one stacked PSD variable, the box-constrained dual, and SDPA export.
//!
//! The structured models pair two Schur-complement LMIs over blocks
//! `U = [[Y, X], [X, Z + eps I]]` and `V = [[I, X], [X, Z]]` with a PSD
//! variable `X`. Stacked into one `5n x 5n` matrix variable
//!
//! ```text
//! W = blkdiag( X, [[I, X], [X, Z]], [[Y, X], [X, Z + eps I]] )
//! ```
//!
//! the model becomes `min <P, W>` subject to elementary-matrix equalities
//! (zero cross blocks, the pinned identity block, the X-block couplings, the
//! Z vs Z + eps I couplings), the data rows `<P_k, W> = b_k`, the trace box
//! `d1 <= <P0, W> <= d2`, and `W >= 0`.

use super::model::{BlockId, BlockSdpProblem, LinExpr, SdpError};
use crate::linalg::SymMatrix;

/// Sparse symmetric matrix: entry `(i, j, v)` with `i <= j` places `v` at
/// both `(i,j)` and `(j,i)`.
#[derive(Debug, Clone, Default)]
pub struct SparseSymMatrix {
    pub dim: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseSymMatrix {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.entries.push((i, j, v));
    }

    pub fn to_sym(&self) -> SymMatrix {
        let mut m = SymMatrix::zeros(self.dim);
        for &(i, j, v) in &self.entries {
            m.set(i, j, m.get(i, j) + v);
        }
        m
    }

    /// `<A, X> = tr(A X)`.
    pub fn inner(&self, x: &SymMatrix) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| {
                if i == j {
                    v * x.get(i, i)
                } else {
                    2.0 * v * x.get(i, j)
                }
            })
            .sum()
    }
}

/// The elementary symmetric matrix `E(k,l)`: ones at `(k,l)` and `(l,k)`,
/// zero elsewhere (a single one when `k == l`).
pub fn elementary_sym(dim: usize, k: usize, l: usize) -> SparseSymMatrix {
    let mut m = SparseSymMatrix::new(dim);
    m.push(k, l, 1.0);
    m
}

/// Standard-form SDP over one PSD matrix variable with an optional two-sided
/// trace-like box row.
#[derive(Debug, Clone)]
pub struct StandardSdp {
    pub dim: usize,
    /// Cost matrix `P`.
    pub cost: SparseSymMatrix,
    /// Constraint matrices with right-hand sides, `<C_i, W> = b_i`.
    pub constraints: Vec<(SparseSymMatrix, f64)>,
    /// Box row `(P0, d1, d2)`: `d1 <= <P0, W> <= d2`.
    pub box_row: Option<(SparseSymMatrix, f64, f64)>,
}

impl StandardSdp {
    /// Views the standard form as a one-block problem for the solver.
    pub fn to_block_problem(&self) -> BlockSdpProblem {
        let mut p = BlockSdpProblem::new();
        let w = p.add_psd_block("W", self.dim);
        let expr_of = |sp: &SparseSymMatrix| {
            let mut e = LinExpr::new();
            for &(i, j, v) in &sp.entries {
                e = e.block_entry(w, i, j, v);
            }
            e
        };
        p.set_objective(expr_of(&self.cost));
        for (c, b) in &self.constraints {
            p.add_equality(expr_of(c), *b);
        }
        if let Some((c, lo, hi)) = &self.box_row {
            p.add_box(expr_of(c), *lo, *hi);
        }
        p
    }
}

// ---------------------------------------------------------------------------
// structured Schur-pair models
// ---------------------------------------------------------------------------

/// Row bookkeeping for the structured symmetric model, used to read dual
/// multipliers back off the solver in the named-block form.
#[derive(Debug, Clone)]
pub struct SchurPairLayout {
    pub n: usize,
    pub eps: f64,
    /// Coefficient on `tr(Z)` in the objective.
    pub trz_weight: f64,
    pub data: Vec<(SymMatrix, f64)>,
    pub trace_box: Option<(f64, f64)>,
    pub u_block: BlockId,
    pub v_block: BlockId,
    pub x_block: BlockId,
    /// `V` top-left pin rows, (i, j) lexicographic over i <= j.
    pub phi_rows: Vec<usize>,
    /// X-to-V coupling rows for the upper off-diagonal (i < j).
    pub v_upper_rows: Vec<usize>,
    /// X-to-V coupling rows for the lower off-diagonal (i < j).
    pub v_lower_rows: Vec<usize>,
    /// X-to-V diagonal coupling rows (i).
    pub v_diag_rows: Vec<usize>,
    /// V-to-U off-block coupling rows, (i, j) over all pairs.
    pub theta_rows: Vec<usize>,
    /// U vs V bottom-right coupling rows, (i, j) lexicographic over i <= j.
    pub q_rows: Vec<usize>,
    /// Data rows `<A_k, X> = b_k`.
    pub data_rows: Vec<usize>,
    /// Index of the trace box among the problem's boxes.
    pub box_index: Option<usize>,
}

#[derive(Debug, Clone)]
pub(crate) enum ModelStructure {
    SchurPairSym(SchurPairLayout),
}

/// Builds the symmetric PSD Schur-pair model
///
/// ```text
/// min tr(Y) + trz_weight * tr(Z)
/// s.t. [[Y, X], [X, Z + eps I]] >= 0,  [[I, X], [X, Z]] >= 0,
///      <A_k, X> = b_k,  trace box on X,  X >= 0
/// ```
///
/// over three blocks `U`, `V`, `X` with the entry couplings spelled out as
/// equality rows in a fixed order.
pub(crate) fn build_schur_pair_sym(
    n: usize,
    eps: f64,
    trz_weight: f64,
    data: &[(SymMatrix, f64)],
    trace_box: Option<(f64, f64)>,
) -> (BlockSdpProblem, SchurPairLayout) {
    let mut p = BlockSdpProblem::new();
    let u = p.add_psd_block("U", 2 * n);
    let v = p.add_psd_block("V", 2 * n);
    let x = p.add_psd_block("X", n);

    let mut phi_rows = Vec::new();
    for i in 0..n {
        for j in i..n {
            let rhs = if i == j { 1.0 } else { 0.0 };
            let r = p.add_equality(LinExpr::new().block_entry(v, i, j, 1.0), rhs);
            phi_rows.push(r);
        }
    }

    let mut v_upper_rows = Vec::new();
    let mut v_lower_rows = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let r = p.add_equality(
                LinExpr::new()
                    .block_entry(x, i, j, 1.0)
                    .block_entry(v, i, n + j, -1.0),
                0.0,
            );
            v_upper_rows.push(r);
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let r = p.add_equality(
                LinExpr::new()
                    .block_entry(x, i, j, 1.0)
                    .block_entry(v, j, n + i, -1.0),
                0.0,
            );
            v_lower_rows.push(r);
        }
    }
    let mut v_diag_rows = Vec::new();
    for i in 0..n {
        let r = p.add_equality(
            LinExpr::new()
                .block_entry(x, i, i, 2.0)
                .block_entry(v, i, n + i, -1.0),
            0.0,
        );
        v_diag_rows.push(r);
    }

    let mut theta_rows = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let r = p.add_equality(
                LinExpr::new()
                    .block_entry(v, i, n + j, 1.0)
                    .block_entry(u, i, n + j, -1.0),
                0.0,
            );
            theta_rows.push(r);
        }
    }

    let mut q_rows = Vec::new();
    for i in 0..n {
        for j in i..n {
            let rhs = if i == j { eps } else { 0.0 };
            let r = p.add_equality(
                LinExpr::new()
                    .block_entry(u, n + i, n + j, 1.0)
                    .block_entry(v, n + i, n + j, -1.0),
                rhs,
            );
            q_rows.push(r);
        }
    }

    let mut data_rows = Vec::new();
    for (a, b) in data {
        let r = p.add_equality(LinExpr::new().block_matrix(x, a), *b);
        data_rows.push(r);
    }

    let mut box_index = None;
    if let Some((lo, hi)) = trace_box {
        box_index = Some(p.add_box(LinExpr::new().block_trace(x, n), lo, hi));
    }

    let mut obj = LinExpr::new();
    for i in 0..n {
        obj = obj.block_entry(u, i, i, 1.0);
        obj = obj.block_entry(v, n + i, n + i, trz_weight);
    }
    p.set_objective(obj);

    let layout = SchurPairLayout {
        n,
        eps,
        trz_weight,
        data: data.to_vec(),
        trace_box,
        u_block: u,
        v_block: v,
        x_block: x,
        phi_rows,
        v_upper_rows,
        v_lower_rows,
        v_diag_rows,
        theta_rows,
        q_rows,
        data_rows,
        box_index,
    };
    p.structure = Some(ModelStructure::SchurPairSym(layout.clone()));
    (p, layout)
}

// ---------------------------------------------------------------------------
// compilation to the 5n standard form
// ---------------------------------------------------------------------------

/// Compiles a structured block model into the stacked single-block standard
/// form. Only models produced by the structured builders compile; anything
/// else is an unsupported-structure error.
pub fn standard_form_compile(p: &BlockSdpProblem) -> Result<StandardSdp, SdpError> {
    let layout = match &p.structure {
        Some(ModelStructure::SchurPairSym(l)) => l,
        None => {
            return Err(SdpError::Compile(
                "problem carries no recognized model structure".into(),
            ))
        }
    };
    let n = layout.n;
    let dim = 5 * n;
    let mut constraints: Vec<(SparseSymMatrix, f64)> = Vec::new();

    // Zero cross blocks: block 1 against blocks 2..5.
    for i in 0..n {
        for j in 0..4 * n {
            constraints.push((elementary_sym(dim, i, n + j), 0.0));
        }
    }
    // Zero cross blocks: blocks 2-3 against blocks 4-5.
    for i in 0..2 * n {
        for j in 0..2 * n {
            constraints.push((elementary_sym(dim, n + i, 3 * n + j), 0.0));
        }
    }
    // Identity block pins.
    for i in 0..n {
        for j in (i + 1)..n {
            constraints.push((elementary_sym(dim, n + i, n + j), 0.0));
        }
    }
    for i in 0..n {
        constraints.push((elementary_sym(dim, n + i, n + i), 1.0));
    }
    // X-block couplings (upper, lower, diagonal).
    for i in 0..n {
        for j in (i + 1)..n {
            let mut c = elementary_sym(dim, i, j);
            c.push(n + i, 2 * n + j, -1.0);
            constraints.push((c, 0.0));
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let mut c = elementary_sym(dim, j, i);
            c.push(n + j, 2 * n + i, -1.0);
            constraints.push((c, 0.0));
        }
    }
    for i in 0..n {
        let mut c = SparseSymMatrix::new(dim);
        c.push(i, i, 2.0);
        c.push(n + i, 2 * n + i, -1.0);
        constraints.push((c, 0.0));
    }
    // V-off to U-off couplings.
    for i in 0..n {
        for j in 0..n {
            let mut c = elementary_sym(dim, n + i, 2 * n + j);
            c.push(3 * n + i, 4 * n + j, -1.0);
            constraints.push((c, 0.0));
        }
    }
    // Z vs Z + eps I couplings.
    for i in 0..n {
        for j in (i + 1)..n {
            let mut c = elementary_sym(dim, 4 * n + i, 4 * n + j);
            c.push(2 * n + i, 2 * n + j, -1.0);
            constraints.push((c, 0.0));
        }
    }
    for i in 0..n {
        let mut c = elementary_sym(dim, 4 * n + i, 4 * n + i);
        c.push(2 * n + i, 2 * n + i, -1.0);
        constraints.push((c, layout.eps));
    }
    // Data rows on the X block.
    for (a, b) in &layout.data {
        let mut c = SparseSymMatrix::new(dim);
        for i in 0..n {
            for j in i..n {
                let v = a.get(i, j);
                if v != 0.0 {
                    c.push(i, j, v);
                }
            }
        }
        constraints.push((c, *b));
    }

    // Cost: tr(Y) + trz_weight tr(Z) over blocks 4 and 3.
    let mut cost = SparseSymMatrix::new(dim);
    for i in 0..n {
        cost.push(3 * n + i, 3 * n + i, 1.0);
        cost.push(2 * n + i, 2 * n + i, layout.trz_weight);
    }

    let box_row = layout.trace_box.map(|(lo, hi)| {
        let mut p0 = SparseSymMatrix::new(dim);
        for i in 0..n {
            p0.push(i, i, 1.0);
        }
        (p0, lo, hi)
    });

    Ok(StandardSdp {
        dim,
        cost,
        constraints,
        box_row,
    })
}

// ---------------------------------------------------------------------------
// dual of the box-constrained standard form
// ---------------------------------------------------------------------------

/// Builds the dual of `min { <C0,W> : <C_i,W> = b_i, d1 <= <C,W> <= d2,
/// W >= 0 }`, namely
///
/// ```text
/// max  b'y + d1 t1 + d2 t2
/// s.t. sum_i y_i C_i + (t1 + t2) C <= C0,  t1 >= 0, t2 <= 0,
/// ```
///
/// expressed as a minimization block problem (the returned problem's optimal
/// value is the negated dual optimum). The slack `S = C0 - sum y_i C_i -
/// (t1 + t2) C` is the single PSD block.
pub fn dual_of_box_sdp(s: &StandardSdp) -> BlockSdpProblem {
    let mut p = BlockSdpProblem::new();
    let dim = s.dim;
    let slack = p.add_psd_block("S", dim);
    let ys: Vec<_> = (0..s.constraints.len())
        .map(|i| p.add_scalar(format!("y{i}")))
        .collect();
    let ts = s.box_row.as_ref().map(|_| {
        let t1 = p.add_scalar("t1");
        let t2 = p.add_scalar("t2");
        (t1, t2)
    });

    // Entry rows: S + sum y_i C_i + (t1 + t2) C = C0.
    let coeff_at = |m: &SparseSymMatrix, i: usize, j: usize| -> f64 {
        m.entries
            .iter()
            .filter(|&&(a, b, _)| (a, b) == (i, j) || (b, a) == (i, j))
            .map(|&(_, _, v)| v)
            .sum()
    };
    for i in 0..dim {
        for j in i..dim {
            let mut e = LinExpr::new().block_entry(slack, i, j, 1.0);
            let w = if i == j { 1.0 } else { 2.0 };
            for (k, (c, _)) in s.constraints.iter().enumerate() {
                let v = coeff_at(c, i, j);
                if v != 0.0 {
                    e = e.scalar(ys[k], w * v);
                }
            }
            if let (Some((t1, t2)), Some((c, _, _))) = (ts, s.box_row.as_ref()) {
                let v = coeff_at(c, i, j);
                if v != 0.0 {
                    e = e.scalar(t1, w * v).scalar(t2, w * v);
                }
            }
            let rhs = w * coeff_at(&s.cost, i, j);
            p.add_equality(e, rhs);
        }
    }

    // Objective: minimize the negated dual objective.
    let mut obj = LinExpr::new();
    for (k, (_, b)) in s.constraints.iter().enumerate() {
        if *b != 0.0 {
            obj = obj.scalar(ys[k], -*b);
        }
    }
    if let (Some((t1, t2)), Some((_, d1, d2))) = (ts, s.box_row.as_ref()) {
        obj = obj.scalar(t1, -*d1).scalar(t2, -*d2);
        p.add_box(LinExpr::new().scalar(t1, 1.0), 0.0, f64::INFINITY);
        p.add_box(LinExpr::new().scalar(t2, 1.0), f64::NEG_INFINITY, 0.0);
    }
    if obj.is_empty() {
        // Degenerate zero objective; keep a well-formed functional.
        obj = obj.constant(0.0);
    }
    p.set_objective(obj);
    p
}

// ---------------------------------------------------------------------------
// SDPA sparse export
// ---------------------------------------------------------------------------

/// Writes the standard form in sparse SDPA format (`.dat-s`). A finite box
/// side turns into an extra constraint with a slack in a diagonal LP block,
/// so external solvers see a plain equality-form SDP.
pub fn to_sdpa_sparse(s: &StandardSdp) -> String {
    let mut rows: Vec<(SparseSymMatrix, f64, Vec<(usize, f64)>)> = s
        .constraints
        .iter()
        .map(|(c, b)| (c.clone(), *b, Vec::new()))
        .collect();
    let mut n_lp = 0usize;
    if let Some((c, lo, hi)) = &s.box_row {
        if lo.is_finite() {
            rows.push((c.clone(), *lo, vec![(n_lp, -1.0)]));
            n_lp += 1;
        }
        if hi.is_finite() {
            rows.push((c.clone(), *hi, vec![(n_lp, 1.0)]));
            n_lp += 1;
        }
    }

    let mut out = String::new();
    out.push_str(&format!("{}\n", rows.len()));
    if n_lp > 0 {
        out.push_str("2\n");
        out.push_str(&format!("{} -{}\n", s.dim, n_lp));
    } else {
        out.push_str("1\n");
        out.push_str(&format!("{}\n", s.dim));
    }
    let rhs: Vec<String> = rows.iter().map(|(_, b, _)| format!("{b}")).collect();
    out.push_str(&rhs.join(" "));
    out.push('\n');

    // Cost matrix is matno 0; entries are 1-based upper triangle.
    for &(i, j, v) in &s.cost.entries {
        if v != 0.0 {
            out.push_str(&format!("0 1 {} {} {}\n", i + 1, j + 1, v));
        }
    }
    for (k, (c, _, lp)) in rows.iter().enumerate() {
        for &(i, j, v) in &c.entries {
            if v != 0.0 {
                out.push_str(&format!("{} 1 {} {} {}\n", k + 1, i + 1, j + 1, v));
            }
        }
        for &(l, v) in lp {
            out.push_str(&format!("{} 2 {} {} {}\n", k + 1, l + 1, l + 1, v));
        }
    }
    out
}
