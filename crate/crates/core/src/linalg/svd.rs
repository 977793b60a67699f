//! Singular value decomposition via one-sided Jacobi orthogonalization.
//!
//! One-sided Jacobi computes the small singular values to high relative
//! accuracy, which matters downstream where `eps / sigma_i^2` error bounds
//! are evaluated. A Gram-matrix route (`svd_via_gram`) is kept as an
//! independent cross-check; it squares the condition number and is only
//! trustworthy for well-conditioned input.

use super::{sym_eig, DenseMatrix, LinalgError};
use crate::linalg::SymMatrix;

/// Full singular value decomposition `X = U diag(sigma) V'`.
///
/// `u` is `m x m`, `v` is `n x n`, both orthogonal; `sigma` has
/// `min(m, n)` entries in descending order.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

impl Svd {
    /// Count of singular values above the standard rank threshold
    /// `max(m, n) * machine_eps * sigma_1`.
    pub fn numerical_rank(&self) -> usize {
        let thresh = self.rank_threshold();
        self.sigma.iter().filter(|&&s| s > thresh).count()
    }

    pub fn rank_threshold(&self) -> f64 {
        let dim_max = self.u.rows().max(self.v.rows()) as f64;
        let s1 = self.sigma.first().copied().unwrap_or(0.0);
        dim_max * f64::EPSILON * s1
    }
}

pub fn svd(x: &DenseMatrix) -> Result<Svd, LinalgError> {
    if !x.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    if x.rows() >= x.cols() {
        jacobi_svd_tall(x)
    } else {
        let t = jacobi_svd_tall(&x.transpose())?;
        Ok(Svd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        })
    }
}

/// One-sided Jacobi on a tall (m >= n) matrix: rotate column pairs until all
/// are mutually orthogonal, then read off sigma and U from the column norms.
fn jacobi_svd_tall(x: &DenseMatrix) -> Result<Svd, LinalgError> {
    let m = x.rows();
    let n = x.cols();
    debug_assert!(m >= n);

    // Column-major working copy of x; v accumulates the right rotations.
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..m).map(|i| x.get(i, j)).collect())
        .collect();
    let mut v = DenseMatrix::identity(n);

    let tol = 1e-15;
    let max_sweeps = 60;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for i in 0..m {
                    app += a[p][i] * a[p][i];
                    aqq += a[q][i] * a[q][i];
                    apq += a[p][i] * a[q][i];
                }
                if apq.abs() <= tol * (app * aqq).sqrt() || apq == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (aqq - app) / (2.0 * apq);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let ap = a[p][i];
                    let aq = a[q][i];
                    a[p][i] = c * ap - s * aq;
                    a[q][i] = s * ap + c * aq;
                }
                for i in 0..n {
                    let vp = v.get(i, p);
                    let vq = v.get(i, q);
                    v.set(i, p, c * vp - s * vq);
                    v.set(i, q, s * vp + c * vq);
                }
            }
        }
        if !rotated {
            break;
        }
    }

    // Column norms are the singular values; sort descending.
    let mut sig: Vec<(f64, usize)> = (0..n)
        .map(|j| ((0..m).map(|i| a[j][i] * a[j][i]).sum::<f64>().sqrt(), j))
        .collect();
    sig.sort_by(|x, y| y.0.partial_cmp(&x.0).expect("finite singular values"));
    let sigma: Vec<f64> = sig.iter().map(|(s, _)| *s).collect();
    let perm: Vec<usize> = sig.iter().map(|(_, j)| *j).collect();
    let v_sorted = DenseMatrix::from_fn(n, n, |i, j| v.get(i, perm[j]));

    // Left vectors: normalized nonzero columns, then an orthonormal
    // completion for the null space.
    let s1 = sigma.first().copied().unwrap_or(0.0);
    let tiny = (m.max(n) as f64) * f64::EPSILON * s1;
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(m);
    for (k, &(s, j)) in sig.iter().enumerate() {
        if s > tiny && s > 0.0 {
            u_cols.push(a[j].iter().map(|&ai| ai / s).collect());
        } else {
            // Keep the slot; fill in the completion pass.
            u_cols.push(vec![0.0; m]);
            let _ = k;
        }
    }
    complete_orthonormal(&mut u_cols, m, &sigma, tiny);
    let u = DenseMatrix::from_fn(m, m, |i, j| u_cols[j][i]);

    Ok(Svd {
        u,
        sigma,
        v: v_sorted,
    })
}

/// Fill the columns whose singular value fell below `tiny` (and the trailing
/// m - n columns) with an orthonormal completion via repeated Gram-Schmidt
/// against the accepted columns.
fn complete_orthonormal(cols: &mut Vec<Vec<f64>>, m: usize, sigma: &[f64], tiny: f64) {
    let n = cols.len();
    let mut have: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut missing_slots: Vec<usize> = Vec::new();
    for (j, col) in cols.iter().enumerate().take(n) {
        if j < sigma.len() && sigma[j] > tiny && sigma[j] > 0.0 {
            have.push(col.clone());
        } else {
            missing_slots.push(j);
        }
    }
    while cols.len() < m {
        missing_slots.push(cols.len());
        cols.push(vec![0.0; m]);
    }

    let mut seed = 0usize;
    for &slot in &missing_slots {
        loop {
            assert!(seed < m, "orthonormal completion ran out of seeds");
            let mut cand = vec![0.0; m];
            cand[seed] = 1.0;
            seed += 1;
            // Two Gram-Schmidt passes.
            for _ in 0..2 {
                for h in &have {
                    let dot: f64 = cand.iter().zip(h).map(|(a, b)| a * b).sum();
                    for (c, hv) in cand.iter_mut().zip(h) {
                        *c -= dot * hv;
                    }
                }
            }
            let norm: f64 = cand.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-3 {
                for c in cand.iter_mut() {
                    *c /= norm;
                }
                cols[slot] = cand.clone();
                have.push(cand);
                break;
            }
        }
    }
}

/// SVD through the eigendecomposition of the Gram matrix `X'X` (or `XX'`,
/// whichever is smaller). Squares the condition number; used as an
/// independent oracle in tests.
pub fn svd_via_gram(x: &DenseMatrix) -> Result<Vec<f64>, LinalgError> {
    if !x.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let gram = if x.rows() >= x.cols() {
        let xt = x.transpose();
        xt.matmul(x)
    } else {
        let xt = x.transpose();
        x.matmul(&xt)
    };
    let g = SymMatrix::from_dense(&gram)?;
    let eig = sym_eig(&g)?;
    Ok(eig.values.iter().map(|&l| l.max(0.0).sqrt()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_svd(x: &DenseMatrix, tol: f64) {
        let d = svd(x).unwrap();
        let m = x.rows();
        let n = x.cols();
        // Reconstruction.
        let rec = DenseMatrix::from_fn(m, n, |i, j| {
            (0..d.sigma.len())
                .map(|k| d.u.get(i, k) * d.sigma[k] * d.v.get(j, k))
                .sum()
        });
        let scale = x.frobenius_norm().max(1.0);
        assert!(rec.sub(x).frobenius_norm() <= tol * scale);
        // Orthogonality.
        let uerr =
            d.u.transpose()
                .matmul(&d.u)
                .sub(&DenseMatrix::identity(m))
                .max_abs();
        let verr =
            d.v.transpose()
                .matmul(&d.v)
                .sub(&DenseMatrix::identity(n))
                .max_abs();
        assert!(uerr < 1e-12 && verr < 1e-12, "uerr={uerr:e} verr={verr:e}");
        // Ordering.
        for w in d.sigma.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn identity_singular_values() {
        let d = svd(&DenseMatrix::identity(3)).unwrap();
        assert_eq!(d.sigma.len(), 3);
        for s in &d.sigma {
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_matrix() {
        let d = svd(&DenseMatrix::zeros(2, 3)).unwrap();
        assert_eq!(d.sigma, vec![0.0, 0.0]);
        check_svd(&DenseMatrix::zeros(2, 3), 1e-14);
    }

    #[test]
    fn diagonal_case() {
        let x = DenseMatrix::new(2, 2, vec![3.0, 0.0, 0.0, 1.0]).unwrap();
        let d = svd(&x).unwrap();
        assert!((d.sigma[0] - 3.0).abs() < 1e-14);
        assert!((d.sigma[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn wide_and_tall() {
        let x = DenseMatrix::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        check_svd(&x, 1e-13);
        check_svd(&x.transpose(), 1e-13);
    }

    #[test]
    fn rank_deficient_rank_detection() {
        // outer product -> rank 1
        let x = DenseMatrix::from_fn(4, 3, |i, j| ((i + 1) * (j + 2)) as f64);
        let d = svd(&x).unwrap();
        assert_eq!(d.numerical_rank(), 1);
        check_svd(&x, 1e-13);
    }

    #[test]
    fn small_singular_values_accurate() {
        // diag(1, 1e-8) embedded via rotation; Jacobi keeps 1e-8 to full
        // relative precision, unlike the Gram route.
        let t = 0.4f64;
        let (c, s) = (t.cos(), t.sin());
        let d0 = [1.0, 1e-8];
        let x = DenseMatrix::from_fn(2, 2, |i, j| {
            let q = [[c, -s], [s, c]];
            q[i][0] * d0[0] * q[j][0] + q[i][1] * d0[1] * q[j][1]
        });
        let d = svd(&x).unwrap();
        // Limited only by the rounding committed when forming x itself;
        // the Gram route would lose the value entirely (error ~ 1e-8).
        assert!((d.sigma[1] - 1e-8).abs() < 1e-14);
    }
}
