//! The smooth rank surrogate and a finite exact-rank scheme.
//!
//! For `eps > 0` the surrogate
//!
//! ```text
//! phi_eps(X) = tr( X (X'X + eps I)^-1 X' ) = sum_i  s_i^2 / (s_i^2 + eps)
//! ```
//!
//! (s_i the singular values of X) approximates `rank(X)` from below, with the
//! exact gap `rank(X) - phi_eps(X) = sum_i eps / (s_i^2 + eps)`. Driving
//! `eps` down a geometric schedule and rounding up recovers the rank after
//! finitely many steps.

use crate::linalg::{solve_spd, svd, DenseMatrix, LinalgError, SymMatrix};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RankApproxError {
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("singular values must be nonnegative, got {0}")]
    NegativeSingularValue(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("rank scheme did not stabilize within {max_iters} iterations")]
    NoConvergence {
        max_iters: usize,
        trace: RankSchemeTrace,
    },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Guard subtracted before taking ceilings so values infinitesimally above an
/// integer do not round the rank up.
pub const ROUND_GUARD: f64 = 1e-6;

/// Surrogate value together with the spectral data it was computed from.
#[derive(Debug, Clone)]
pub struct PhiResult {
    pub value: f64,
    pub epsilon: f64,
    /// Descending, numerically nonzero singular values.
    pub singular_values: Vec<f64>,
    pub numerical_rank: usize,
}

/// One evaluation per schedule step of the exact-rank scheme.
#[derive(Debug, Clone)]
pub struct RankSchemeTrace {
    /// `(epsilon, phi_value, rounded_rank)` per iteration.
    pub iterations: Vec<(f64, f64, usize)>,
    pub final_rank: usize,
    pub final_epsilon: f64,
}

/// Parameters of the geometric continuation in `exact_rank_scheme`.
#[derive(Debug, Clone)]
pub struct RankSchemeParams {
    pub epsilon0: f64,
    pub beta: f64,
    pub stability_window: usize,
    pub max_iters: usize,
    /// A stability step only counts when `ceil(phi) - phi` is at most this,
    /// i.e. the exact gap formula says the plateau is converged.
    pub integrality_tol: f64,
}

impl RankSchemeParams {
    /// Scale-aware defaults: `epsilon0 = ||X||_F^2`, geometric factor 1/4.
    pub fn default_for(x: &DenseMatrix) -> Self {
        let norm2 = x.frobenius_norm().powi(2);
        Self {
            epsilon0: if norm2 > 0.0 { norm2 } else { 1.0 },
            beta: 0.25,
            stability_window: 3,
            max_iters: 60,
            integrality_tol: 1e-3,
        }
    }
}

/// `phi_eps(X)` evaluated through the resolvent definition with an SPD solve
/// on the smaller Gram matrix.
pub fn phi_direct(x: &DenseMatrix, epsilon: f64) -> Result<f64, RankApproxError> {
    if !(epsilon > 0.0) {
        return Err(RankApproxError::NonPositiveEpsilon(epsilon));
    }
    if !x.is_finite() {
        return Err(RankApproxError::Linalg(LinalgError::NonFinite));
    }
    // tr(X (X'X + eps I)^-1 X') = tr((XX' + eps I)^-1 XX'), so work with
    // whichever Gram matrix is smaller.
    let (m, n) = (x.rows(), x.cols());
    let (gram, rhs) = if n <= m {
        let xt = x.transpose();
        (xt.matmul(x), xt)
    } else {
        let xt = x.transpose();
        (x.matmul(&xt), x.clone())
    };
    let k = gram.rows();
    let shifted = SymMatrix::from_fn(k, |i, j| {
        0.5 * (gram.get(i, j) + gram.get(j, i)) + if i == j { epsilon } else { 0.0 }
    });
    let w = solve_spd(&shifted, &rhs)?;
    // phi = <rhs, w> entrywise.
    let mut acc = 0.0;
    for i in 0..rhs.rows() {
        for j in 0..rhs.cols() {
            acc += rhs.get(i, j) * w.get(i, j);
        }
    }
    Ok(acc)
}

/// `phi_eps` from a list of singular values.
pub fn phi_sv(sigma: &[f64], epsilon: f64) -> Result<f64, RankApproxError> {
    if !(epsilon > 0.0) {
        return Err(RankApproxError::NonPositiveEpsilon(epsilon));
    }
    let mut acc = 0.0;
    for &s in sigma {
        if s < 0.0 {
            return Err(RankApproxError::NegativeSingularValue(s));
        }
        if s > 0.0 {
            acc += s * s / (s * s + epsilon);
        }
    }
    Ok(acc)
}

/// Full surrogate evaluation: value, numerically nonzero spectrum, rank.
pub fn phi_result(x: &DenseMatrix, epsilon: f64) -> Result<PhiResult, RankApproxError> {
    if !(epsilon > 0.0) {
        return Err(RankApproxError::NonPositiveEpsilon(epsilon));
    }
    let d = svd(x)?;
    let r = d.numerical_rank();
    let sv: Vec<f64> = d.sigma[..r].to_vec();
    let value = phi_sv(&sv, epsilon)?;
    Ok(PhiResult {
        value,
        epsilon,
        singular_values: sv,
        numerical_rank: r,
    })
}

/// Exact gap `rank(X) - phi_eps(X)` and its epsilon-linear upper bound.
///
/// Returns `(gap_exact, gap_upper)` where
/// `gap_exact = sum_i eps/(s_i^2 + eps)` and `gap_upper = eps * sum_i 1/s_i^2`
/// over the numerically nonzero singular values.
pub fn rank_gap(x: &DenseMatrix, epsilon: f64) -> Result<(f64, f64), RankApproxError> {
    let r = phi_result(x, epsilon)?;
    let gap_exact: f64 = r
        .singular_values
        .iter()
        .map(|&s| epsilon / (s * s + epsilon))
        .sum();
    let gap_upper: f64 = epsilon
        * r.singular_values
            .iter()
            .map(|&s| 1.0 / (s * s))
            .sum::<f64>();
    Ok((gap_exact, gap_upper))
}

/// Uniform approximation bound over a solution set whose smallest nonzero
/// singular value is at least `delta`: `eps * min(m, n) / delta^2`.
pub fn uniform_rank_bound(m: usize, n: usize, delta: f64, epsilon: f64) -> f64 {
    epsilon * (m.min(n) as f64) / (delta * delta)
}

fn round_up(phi: f64) -> usize {
    let v = (phi - ROUND_GUARD).ceil();
    if v <= 0.0 {
        0
    } else {
        v as usize
    }
}

/// Geometric continuation that recovers `rank(X)` after finitely many steps:
/// evaluate `phi_eps`, round up, shrink `eps` by `beta`, and stop when the
/// rounded value repeats `stability_window` times with a near-integral phi
/// (the exact gap bound certifies the plateau).
pub fn exact_rank_scheme(
    x: &DenseMatrix,
    params: &RankSchemeParams,
) -> Result<RankSchemeTrace, RankApproxError> {
    if !(params.epsilon0 > 0.0) {
        return Err(RankApproxError::InvalidParameter(format!(
            "epsilon0 must be positive, got {}",
            params.epsilon0
        )));
    }
    if !(params.beta > 0.0 && params.beta < 1.0) {
        return Err(RankApproxError::InvalidParameter(format!(
            "beta must lie in (0,1), got {}",
            params.beta
        )));
    }
    if params.stability_window == 0 || params.max_iters == 0 {
        return Err(RankApproxError::InvalidParameter(
            "stability_window and max_iters must be positive".into(),
        ));
    }

    // The zero matrix is exact at any epsilon.
    if x.frobenius_norm() == 0.0 {
        return Ok(RankSchemeTrace {
            iterations: vec![(params.epsilon0, 0.0, 0)],
            final_rank: 0,
            final_epsilon: params.epsilon0,
        });
    }

    let mut iterations = Vec::new();
    let mut eps = params.epsilon0;
    let mut streak = 0usize;
    let mut last_rounded = usize::MAX;
    for _ in 0..params.max_iters {
        let phi = phi_direct(x, eps)?;
        let rounded = round_up(phi);
        iterations.push((eps, phi, rounded));

        let frac_gap = rounded as f64 - phi;
        if rounded == last_rounded && frac_gap >= 0.0 && frac_gap <= params.integrality_tol {
            streak += 1;
        } else if frac_gap >= 0.0 && frac_gap <= params.integrality_tol {
            last_rounded = rounded;
            streak = 1;
        } else {
            last_rounded = rounded;
            streak = 0;
        }
        if streak >= params.stability_window {
            return Ok(RankSchemeTrace {
                iterations,
                final_rank: rounded,
                final_epsilon: eps,
            });
        }
        eps *= params.beta;
    }
    let final_epsilon = iterations.last().map(|t| t.0).unwrap_or(params.epsilon0);
    let final_rank = iterations.last().map(|t| t.2).unwrap_or(0);
    Err(RankApproxError::NoConvergence {
        max_iters: params.max_iters,
        trace: RankSchemeTrace {
            iterations,
            final_rank,
            final_epsilon,
        },
    })
}
