//! Certified dual lower bounds.
//!
//! A dual objective value is a valid lower bound on the primal optimum only
//! at an exactly dual-feasible point. Interior-point iterates keep the cone
//! constraints strict but satisfy the linear dual equations only to solver
//! tolerance, so the returned multipliers are projected to exact feasibility
//! first:
//!
//! * sign-constrained box multipliers are clamped,
//! * free-variable rows are corrected by a minimum-norm multiplier shift,
//! * each dual slack `C_b - A*(y)` short of PSD by `delta` is lifted by
//!   `delta I`, paid for either through a trace row on that block (shifting
//!   its multiplier) or through a known trace cap at the optimum.
//!
//! The repaired objective value is then a weak-duality bound up to the
//! eigensolver's own certification accuracy.

use super::model::{BlockSdpProblem, SdpError};
use super::solver::{normalize, BoxRows, InternalForm, SdpSolution};
use crate::linalg::{min_eigenvalue, SymMatrix};

/// Computes a certified lower bound from a solution's dual point, repairing
/// small infeasibilities. Fails when the point is too infeasible to repair
/// within `repair_tol` (relative objective change).
pub fn certified_lower_bound(
    sol: &SdpSolution,
    p: &BlockSdpProblem,
    repair_tol: f64,
) -> Result<f64, SdpError> {
    let form = normalize(p)?;
    let mut y = internal_dual(&form, sol);
    let base_obj = form_dual_objective(&form, &y);

    // Free-variable dual rows must hold exactly; clamp + least-squares
    // correct, iterating because the correction can disturb the signs.
    for _ in 0..6 {
        clamp_box_signs(&form, &mut y);
        if form.n_free == 0 {
            break;
        }
        let rf = free_residual(&form, &y);
        let worst = rf.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if worst <= 1e-13 * (1.0 + max_abs(&form.cost_free)) {
            break;
        }
        least_squares_correct(&form, &mut y, &rf)?;
    }
    clamp_box_signs(&form, &mut y);
    let rf = free_residual(&form, &y);
    if max_abs(&rf) > 1e-9 * (1.0 + max_abs(&form.cost_free)) {
        return Err(SdpError::BoundUnavailable(
            "free-variable dual rows could not be repaired".into(),
        ));
    }

    // Lift each deficient dual slack.
    let mut cap_penalty = 0.0;
    for b in 0..form.block_dims.len() {
        let n = form.block_dims[b];
        let s = form.dual_slack_from_y(b, &y);
        let sym = SymMatrix::from_fn(n, |i, j| 0.5 * (s[i * n + j] + s[j * n + i]));
        let lam = min_eigenvalue(&sym).map_err(|e| SdpError::BoundUnavailable(e.to_string()))?;
        if lam >= 0.0 {
            continue;
        }
        let scale = 1.0 + sym.frobenius_norm();
        let delta = -lam + 1e-13 * scale;
        if let Some((row, alpha)) = trace_row_for_block(&form, b) {
            y[row] -= delta / alpha;
        } else if let Some(cap) = p.trace_caps[b] {
            cap_penalty += delta * cap;
        } else {
            return Err(SdpError::BoundUnavailable(format!(
                "dual slack for block {b} is short of PSD by {delta:.3e} and no trace row or cap is available"
            )));
        }
    }

    // Re-verify PSD-ness of every lifted slack.
    for b in 0..form.block_dims.len() {
        let n = form.block_dims[b];
        let s = form.dual_slack_from_y(b, &y);
        let sym = SymMatrix::from_fn(n, |i, j| 0.5 * (s[i * n + j] + s[j * n + i]));
        let lam = min_eigenvalue(&sym).map_err(|e| SdpError::BoundUnavailable(e.to_string()))?;
        if lam < -1e-12 * (1.0 + sym.frobenius_norm()) {
            return Err(SdpError::BoundUnavailable(format!(
                "dual slack for block {b} still indefinite after repair (lambda_min {lam:.3e})"
            )));
        }
    }

    let mut bound = form_dual_objective(&form, &y) - cap_penalty;

    // Primal-residual coupling margin: the comparison target, the primal
    // objective at the returned (slightly infeasible) point, can undershoot
    // the true optimum by about |y' r_p|.
    let margin = primal_residual_margin(&form, sol, &y);
    bound -= margin;

    let change = (bound - base_obj).abs();
    if change > repair_tol * (1.0 + base_obj.abs()) {
        return Err(SdpError::BoundUnavailable(format!(
            "repair moved the dual objective by {change:.3e}, beyond repair_tol"
        )));
    }
    Ok(bound)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Reconstructs the internal multiplier vector from the public solution.
fn internal_dual(form: &InternalForm, sol: &SdpSolution) -> Vec<f64> {
    let mut y = vec![0.0; form.rows.len()];
    for (k, &r) in form.eq_rows.iter().enumerate() {
        y[r] = sol.dual_equality_multipliers[k];
    }
    for (k, br) in form.box_rows.iter().enumerate() {
        let (t1, t2) = sol.dual_box_multipliers[k];
        match br {
            BoxRows::Equality(r) => y[*r] = t1 + t2,
            BoxRows::Lower(r) => y[*r] = t1,
            BoxRows::Upper(r) => y[*r] = t2,
            BoxRows::Both { lower, upper } => {
                y[*lower] = t1;
                y[*upper] = t2;
            }
            BoxRows::Free => {}
        }
    }
    y
}

/// Lower-side multipliers must be >= 0, upper-side <= 0. The slack reduced
/// costs equal these multipliers up to sign, so clamping enforces the LP
/// part of dual feasibility exactly.
fn clamp_box_signs(form: &InternalForm, y: &mut [f64]) {
    for br in &form.box_rows {
        match br {
            BoxRows::Lower(r) => y[*r] = y[*r].max(0.0),
            BoxRows::Upper(r) => y[*r] = y[*r].min(0.0),
            BoxRows::Both { lower, upper } => {
                y[*lower] = y[*lower].max(0.0);
                y[*upper] = y[*upper].min(0.0);
            }
            _ => {}
        }
    }
}

fn free_residual(form: &InternalForm, y: &[f64]) -> Vec<f64> {
    let mut rf = form.cost_free.clone();
    for (i, row) in form.rows.iter().enumerate() {
        for &(k, a) in &row.free {
            rf[k] -= a * y[i];
        }
    }
    rf
}

/// Minimum-norm shift `dy` with `A_f'(y + dy) = c_free`.
fn least_squares_correct(form: &InternalForm, y: &mut [f64], rf: &[f64]) -> Result<(), SdpError> {
    let nf = form.n_free;
    let p = form.rows.len();
    let mut af: Vec<Vec<f64>> = vec![vec![0.0; p]; nf];
    for (i, row) in form.rows.iter().enumerate() {
        for &(k, a) in &row.free {
            af[k][i] = a;
        }
    }
    let mut gram = vec![0.0; nf * nf];
    for a in 0..nf {
        for b in 0..nf {
            gram[a * nf + b] = af[a].iter().zip(&af[b]).map(|(x, z)| x * z).sum();
        }
    }
    for a in 0..nf {
        gram[a * nf + a] += 1e-14;
    }
    let ch = crate::linalg::chol::Cholesky::factor_dense(nf, &gram)
        .map_err(|_| SdpError::BoundUnavailable("free-variable rows are degenerate".into()))?;
    let mut coef = rf.to_vec();
    ch.solve_vec(&mut coef);
    for (k, col) in af.iter().enumerate() {
        for i in 0..p {
            y[i] += col[i] * coef[k];
        }
    }
    Ok(())
}

/// Finds a row usable to absorb an identity shift on block `b`: a pure
/// equality or upper-box row whose only matrix coefficient is `alpha I` on
/// that block and which touches no free variables.
fn trace_row_for_block(form: &InternalForm, b: usize) -> Option<(usize, f64)> {
    let n = form.block_dims[b];
    let usable_row = |r: usize| -> Option<f64> {
        let row = &form.rows[r];
        if !row.free.is_empty() || row.blocks.len() != 1 {
            return None;
        }
        let (bb, sp) = &row.blocks[0];
        if *bb != b || sp.0.len() != n {
            return None;
        }
        let alpha = sp.0[0].2;
        if alpha <= 0.0 {
            return None;
        }
        let mut seen = vec![false; n];
        for &(i, j, v) in &sp.0 {
            if i != j || (v - alpha).abs() > 1e-14 * alpha.abs() {
                return None;
            }
            seen[i] = true;
        }
        seen.iter().all(|&s| s).then_some(alpha)
    };

    // Prefer equality rows (their multiplier has no sign restriction).
    // Upper rows are safe too: decreasing their multiplier stays <= 0 and
    // pushes the slack's reduced cost further positive. Lower rows are NOT
    // usable, the shift would drive their multiplier below zero.
    for &r in &form.eq_rows {
        if let Some(a) = usable_row(r) {
            return Some((r, a));
        }
    }
    for br in &form.box_rows {
        let cand = match br {
            BoxRows::Equality(r) => Some(*r),
            BoxRows::Upper(r) => Some(*r),
            BoxRows::Both { upper, .. } => Some(*upper),
            _ => None,
        };
        if let Some(r) = cand {
            if let Some(a) = usable_row(r) {
                return Some((r, a));
            }
        }
    }
    None
}

fn form_dual_objective(form: &InternalForm, y: &[f64]) -> f64 {
    form.obj_const + form.rhs.iter().zip(y).map(|(b, y)| b * y).sum::<f64>()
}

fn primal_residual_margin(form: &InternalForm, sol: &SdpSolution, y: &[f64]) -> f64 {
    // ||y|| * ||r_p|| evaluated at the returned primal point. Box slacks are
    // not stored in the solution; bound their residual contribution by the
    // box rows' primal violation (zero when the box is satisfied).
    let mut rp2 = 0.0f64;
    for (k, &r) in form.eq_rows.iter().enumerate() {
        let _ = k;
        let mut v = -form.rhs[r];
        let row = &form.rows[r];
        for (b, sp) in &row.blocks {
            let n = form.block_dims[*b];
            let x = sol.primal_blocks[*b].to_dense();
            v += sp.inner_dense(x.data(), n);
        }
        for &(kk, a) in &row.free {
            v += a * sol.scalar_values[kk];
        }
        rp2 += v * v;
    }
    let y2 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    y2 * rp2.sqrt()
}
