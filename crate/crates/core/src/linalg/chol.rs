//! Cholesky factorization and SPD solves.

use super::{DenseMatrix, LinalgError, SymMatrix};

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix,
/// stored dense row-major.
pub(crate) struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn factor(a: &SymMatrix) -> Result<Self, LinalgError> {
        Self::factor_dense(a.dim(), a.to_dense().data())
    }

    /// Factors a dense symmetric matrix given by its full row-major storage.
    pub fn factor_dense(n: usize, a: &[f64]) -> Result<Self, LinalgError> {
        debug_assert_eq!(a.len(), n * n);
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = a[i * n + j];
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if sum <= 0.0 || !sum.is_finite() {
                        return Err(LinalgError::NotPositiveDefinite {
                            index: i,
                            pivot: sum,
                        });
                    }
                    l[i * n + i] = sum.sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        Ok(Self { n, l })
    }

    /// Solves `A x = b` in place.
    pub fn solve_vec(&self, b: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        for i in 0..n {
            let mut sum = b[i];
            for k in 0..i {
                sum -= self.l[i * n + k] * b[k];
            }
            b[i] = sum / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut sum = b[i];
            for k in (i + 1)..n {
                sum -= self.l[k * n + i] * b[k];
            }
            b[i] = sum / self.l[i * n + i];
        }
    }

    /// Solves `L y = b` (forward substitution only).
    pub fn forward_vec(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut sum = b[i];
            for k in 0..i {
                sum -= self.l[i * n + k] * b[k];
            }
            b[i] = sum / self.l[i * n + i];
        }
    }

    /// Dense inverse of `A` via forward/back substitution on unit vectors.
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.n;
        let mut inv = vec![0.0; n * n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            col.iter_mut().for_each(|v| *v = 0.0);
            col[j] = 1.0;
            self.solve_vec(&mut col);
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }
        // Symmetrize against rounding.
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (inv[i * n + j] + inv[j * n + i]);
                inv[i * n + j] = avg;
                inv[j * n + i] = avg;
            }
        }
        inv
    }
}

/// Solves `A X = B` for symmetric positive definite `A`.
pub fn solve_spd(a: &SymMatrix, b: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    if !a.is_finite() || !b.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    if a.dim() != b.rows() {
        return Err(LinalgError::DimensionMismatch(format!(
            "A is {0}x{0}, B has {1} rows",
            a.dim(),
            b.rows()
        )));
    }
    let chol = Cholesky::factor(a)?;
    let n = a.dim();
    let mut out = DenseMatrix::zeros(n, b.cols());
    let mut col = vec![0.0; n];
    for j in 0..b.cols() {
        for i in 0..n {
            col[i] = b.get(i, j);
        }
        chol.solve_vec(&mut col);
        for i in 0..n {
            out.set(i, j, col[i]);
        }
    }
    Ok(out)
}
