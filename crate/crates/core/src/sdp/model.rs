//! Block SDP modeling layer.
//!
//! A problem is a set of PSD matrix blocks and free scalar variables tied
//! together by affine equalities and two-sided box inequalities, with an
//! affine objective to minimize. Matrix coefficients use the elementary
//! symmetric matrix convention: a term `(block, i, j, v)` stands for
//! `v * E(i,j)` in the coefficient matrix, so it contributes
//! `v * X[i][j]` when `i == j` and `2 v * X[i][j]` otherwise.

use crate::linalg::SymMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("model error: {0}")]
    Model(String),
    #[error("unsupported structure for standard-form compilation: {0}")]
    Compile(String),
    #[error("certified bound unavailable: {0}")]
    BoundUnavailable(String),
}

/// Handle to a PSD block of a particular problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockId(pub(crate) usize);

/// Handle to a free scalar variable of a particular problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScalarId(pub(crate) usize);

/// Affine functional over the blocks and scalars of one problem.
#[derive(Debug, Clone, Default)]
pub struct LinExpr {
    /// `(block, i, j, v)` with `i <= j`, elementary-matrix convention.
    pub(crate) block_terms: Vec<(usize, usize, usize, f64)>,
    pub(crate) scalar_terms: Vec<(usize, f64)>,
    pub(crate) constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `v * E(i,j)` against a block (contributes `2 v X_ij` off-diagonal).
    pub fn block_entry(mut self, b: BlockId, i: usize, j: usize, v: f64) -> Self {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.block_terms.push((b.0, i, j, v));
        self
    }

    /// Adds `<A, X_b>` for a symmetric coefficient matrix `A`.
    pub fn block_matrix(mut self, b: BlockId, a: &SymMatrix) -> Self {
        for i in 0..a.dim() {
            for j in i..a.dim() {
                let v = a.get(i, j);
                if v != 0.0 {
                    self.block_terms.push((b.0, i, j, v));
                }
            }
        }
        self
    }

    /// Adds `tr(X_b)`.
    pub fn block_trace(mut self, b: BlockId, dim: usize) -> Self {
        for i in 0..dim {
            self.block_terms.push((b.0, i, i, 1.0));
        }
        self
    }

    pub fn scalar(mut self, s: ScalarId, v: f64) -> Self {
        self.scalar_terms.push((s.0, v));
        self
    }

    pub fn constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn is_empty(&self) -> bool {
        self.block_terms.is_empty() && self.scalar_terms.is_empty()
    }

    fn is_finite(&self) -> bool {
        self.constant.is_finite()
            && self.block_terms.iter().all(|t| t.3.is_finite())
            && self.scalar_terms.iter().all(|t| t.1.is_finite())
    }

    /// Evaluates against concrete block values and scalar values.
    pub fn eval(&self, blocks: &[SymMatrix], scalars: &[f64]) -> f64 {
        let mut acc = self.constant;
        for &(b, i, j, v) in &self.block_terms {
            let w = if i == j { 1.0 } else { 2.0 };
            acc += w * v * blocks[b].get(i, j);
        }
        for &(s, v) in &self.scalar_terms {
            acc += v * scalars[s];
        }
        acc
    }

    /// The coefficient of this functional against one block, as a matrix.
    pub fn block_coefficient(&self, b: BlockId, dim: usize) -> SymMatrix {
        let mut m = SymMatrix::zeros(dim);
        for &(bb, i, j, v) in &self.block_terms {
            if bb == b.0 {
                m.set(i, j, m.get(i, j) + v);
            }
        }
        m
    }
}

/// Convex model with PSD blocks, free scalars, equalities, and boxes.
#[derive(Debug, Clone)]
pub struct BlockSdpProblem {
    pub(crate) block_names: Vec<String>,
    pub(crate) block_dims: Vec<usize>,
    pub(crate) scalar_names: Vec<String>,
    pub(crate) equalities: Vec<(LinExpr, f64)>,
    pub(crate) boxes: Vec<(LinExpr, f64, f64)>,
    pub(crate) objective: Option<LinExpr>,
    /// Optional upper bound on `tr(X_b)` at some optimal solution; used to
    /// repair slightly infeasible dual points into valid lower bounds.
    pub(crate) trace_caps: Vec<Option<f64>>,
    /// Structure tag set by the model builders that the standard-form
    /// compiler understands.
    pub(crate) structure: Option<super::standard::ModelStructure>,
}

impl Default for BlockSdpProblem {
    fn default() -> Self {
        Self::new()
    }
}

impl BlockSdpProblem {
    pub fn new() -> Self {
        Self {
            block_names: Vec::new(),
            block_dims: Vec::new(),
            scalar_names: Vec::new(),
            equalities: Vec::new(),
            boxes: Vec::new(),
            objective: None,
            trace_caps: Vec::new(),
            structure: None,
        }
    }

    pub fn add_psd_block(&mut self, name: impl Into<String>, dim: usize) -> BlockId {
        self.block_names.push(name.into());
        self.block_dims.push(dim);
        self.trace_caps.push(None);
        BlockId(self.block_dims.len() - 1)
    }

    pub fn add_scalar(&mut self, name: impl Into<String>) -> ScalarId {
        self.scalar_names.push(name.into());
        ScalarId(self.scalar_names.len() - 1)
    }

    pub fn add_equality(&mut self, expr: LinExpr, rhs: f64) -> usize {
        self.equalities.push((expr, rhs));
        self.equalities.len() - 1
    }

    /// `lower <= expr <= upper`; either side may be infinite.
    pub fn add_box(&mut self, expr: LinExpr, lower: f64, upper: f64) -> usize {
        self.boxes.push((expr, lower, upper));
        self.boxes.len() - 1
    }

    pub fn set_objective(&mut self, expr: LinExpr) {
        self.objective = Some(expr);
    }

    pub fn set_trace_cap(&mut self, b: BlockId, cap: f64) {
        self.trace_caps[b.0] = Some(cap);
    }

    pub fn num_blocks(&self) -> usize {
        self.block_dims.len()
    }

    pub fn block_dim(&self, b: BlockId) -> usize {
        self.block_dims[b.0]
    }

    pub fn num_scalars(&self) -> usize {
        self.scalar_names.len()
    }

    pub fn num_equalities(&self) -> usize {
        self.equalities.len()
    }

    pub fn num_boxes(&self) -> usize {
        self.boxes.len()
    }

    pub fn objective(&self) -> Option<&LinExpr> {
        self.objective.as_ref()
    }

    fn check_expr(&self, expr: &LinExpr, what: &str) -> Result<(), SdpError> {
        if !expr.is_finite() {
            return Err(SdpError::Model(format!("{what}: non-finite coefficient")));
        }
        for &(b, i, j, _) in &expr.block_terms {
            let dim = *self
                .block_dims
                .get(b)
                .ok_or_else(|| SdpError::Model(format!("{what}: unknown block {b}")))?;
            if j >= dim || i > j {
                return Err(SdpError::Model(format!(
                    "{what}: entry ({i},{j}) out of range for block of dim {dim}"
                )));
            }
        }
        for &(s, _) in &expr.scalar_terms {
            if s >= self.scalar_names.len() {
                return Err(SdpError::Model(format!("{what}: unknown scalar {s}")));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        if self.block_dims.contains(&0) {
            return Err(SdpError::Model("PSD block of dimension 0".into()));
        }
        let obj = self
            .objective
            .as_ref()
            .ok_or_else(|| SdpError::Model("objective not set".into()))?;
        self.check_expr(obj, "objective")?;
        for (k, (e, rhs)) in self.equalities.iter().enumerate() {
            self.check_expr(e, &format!("equality {k}"))?;
            if !rhs.is_finite() {
                return Err(SdpError::Model(format!("equality {k}: non-finite rhs")));
            }
        }
        for (k, (e, lo, hi)) in self.boxes.iter().enumerate() {
            self.check_expr(e, &format!("box {k}"))?;
            if lo.is_nan() || hi.is_nan() {
                return Err(SdpError::Model(format!("box {k}: NaN bound")));
            }
            if lo > hi {
                return Err(SdpError::Model(format!(
                    "box {k}: lower {lo} exceeds upper {hi}"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_catches_bad_models() {
        let mut p = BlockSdpProblem::new();
        let b = p.add_psd_block("w", 2);
        // no objective yet
        assert!(p.validate().is_err());
        p.set_objective(LinExpr::new().block_trace(b, 2));
        assert!(p.validate().is_ok());
        // out-of-range entry
        p.add_equality(LinExpr::new().block_entry(b, 0, 5, 1.0), 0.0);
        assert!(p.validate().is_err());
    }

    #[test]
    fn box_bounds_ordered() {
        let mut p = BlockSdpProblem::new();
        let b = p.add_psd_block("w", 1);
        p.set_objective(LinExpr::new().block_trace(b, 1));
        p.add_box(LinExpr::new().block_trace(b, 1), 2.0, 1.0);
        assert!(p.validate().is_err());
    }

    #[test]
    fn expr_eval_uses_elementary_convention() {
        let mut p = BlockSdpProblem::new();
        let b = p.add_psd_block("w", 2);
        let e = LinExpr::new().block_entry(b, 0, 1, 1.0);
        let x = SymMatrix::from_fn(2, |i, j| if i == j { 0.0 } else { 3.0 });
        assert_eq!(e.eval(&[x], &[]), 6.0);
        let _ = p;
    }
}
