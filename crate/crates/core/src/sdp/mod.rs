//! Dense block-SDP modeling and solving.
//!
//! The model layer ([`BlockSdpProblem`]) supports PSD matrix blocks, free
//! scalars, affine equalities, and two-sided boxes whose duals carry the
//! `(t1 >= 0, t2 <= 0)` multiplier pair. [`solve`] runs a primal-dual
//! path-following method; [`certified_lower_bound`] turns an approximate
//! dual point into a weak-duality bound that remains valid under floating
//! point; [`standard_form_compile`] stacks the structured models into a
//! single-block standard form, with [`dual_of_box_sdp`] and SDPA export for
//! cross-checking.

mod bound;
mod model;
mod solver;
pub(crate) mod standard;

pub use bound::certified_lower_bound;
pub use model::{BlockId, BlockSdpProblem, LinExpr, ScalarId, SdpError};
pub use solver::{solve, SdpSolution, SdpStatus, SolverOptions};
pub use standard::{
    dual_of_box_sdp, elementary_sym, standard_form_compile, to_sdpa_sparse, SchurPairLayout,
    SparseSymMatrix, StandardSdp,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMatrix;

    fn solve_default(p: &BlockSdpProblem) -> SdpSolution {
        solve(p, &SolverOptions::default()).expect("well-formed model")
    }

    #[test]
    fn min_trace_with_pinned_entry() {
        // min tr(W), <E(0,0), W> = 1, W in S^2, W >= 0  ->  1 at diag(1, 0)
        let mut p = BlockSdpProblem::new();
        let w = p.add_psd_block("W", 2);
        p.set_objective(LinExpr::new().block_trace(w, 2));
        p.add_equality(LinExpr::new().block_entry(w, 0, 0, 1.0), 1.0);
        let sol = solve_default(&p);
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.primal_objective - 1.0).abs() < 1e-6);
        assert!((sol.primal_blocks[0].get(0, 0) - 1.0).abs() < 1e-6);
        assert!(sol.primal_blocks[0].get(1, 1).abs() < 1e-6);
        assert!(sol.certified_lower_bound <= sol.primal_objective);
        assert!(sol.certified_lower_bound > 0.999999);
    }

    #[test]
    fn max_trace_under_box() {
        // min -tr(W) s.t. tr(W) <= 1, W >= 0  ->  -1
        let mut p = BlockSdpProblem::new();
        let w = p.add_psd_block("W", 2);
        let mut obj = LinExpr::new();
        for i in 0..2 {
            obj = obj.block_entry(w, i, i, -1.0);
        }
        p.set_objective(obj);
        p.add_box(LinExpr::new().block_trace(w, 2), f64::NEG_INFINITY, 1.0);
        let sol = solve_default(&p);
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.primal_objective + 1.0).abs() < 1e-6);
        let (t1, t2) = sol.dual_box_multipliers[0];
        assert!(t1 >= 0.0 && t2 <= 0.0);
        assert!((t2 + 1.0).abs() < 1e-5, "upper multiplier should be -1");
    }

    #[test]
    fn min_eigenvalue_variational() {
        // min <diag(1,-1), W> s.t. tr(W) = 1, W >= 0  ->  -1
        let mut p = BlockSdpProblem::new();
        let w = p.add_psd_block("W", 2);
        p.set_objective(LinExpr::new().block_matrix(w, &SymMatrix::diag(&[1.0, -1.0])));
        p.add_equality(LinExpr::new().block_trace(w, 2), 1.0);
        let sol = solve_default(&p);
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.primal_objective + 1.0).abs() < 1e-7);
        // KKT at optimality: complementarity within the gap tolerance
        let compl = sol.primal_blocks[0].inner(&sol.dual_slack[0]);
        let budget = 1e-8 * (1.0 + sol.primal_objective.abs() + sol.dual_objective.abs());
        assert!(compl.abs() <= 10.0 * budget, "complementarity {compl:.3e}");
        // the certified bound survives the repair and stays below -1 + tol
        assert!(sol.certified_lower_bound <= sol.primal_objective);
        assert!((sol.certified_lower_bound + 1.0).abs() < 1e-7);
    }

    #[test]
    fn free_scalars_and_lmi() {
        // max t s.t. diag(2, 3) - t I >= 0, i.e. min -t; optimum t = 2.
        let mut p = BlockSdpProblem::new();
        let s = p.add_psd_block("S", 2);
        let t = p.add_scalar("t");
        p.set_objective(LinExpr::new().scalar(t, -1.0));
        let a = SymMatrix::diag(&[2.0, 3.0]);
        for i in 0..2 {
            for j in i..2 {
                let e = LinExpr::new()
                    .block_entry(s, i, j, 1.0)
                    .scalar(t, if i == j { 1.0 } else { 0.0 });
                let w = if i == j { 1.0 } else { 2.0 };
                p.add_equality(e, w * a.get(i, j));
            }
        }
        let sol = solve_default(&p);
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.scalar_values[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn infeasible_detected() {
        // tr(W) = -1 with W >= 0 is infeasible; the dual diverges.
        let mut p = BlockSdpProblem::new();
        let w = p.add_psd_block("W", 2);
        p.set_objective(LinExpr::new().block_trace(w, 2));
        p.add_equality(LinExpr::new().block_trace(w, 2), -1.0);
        let sol = solve_default(&p);
        assert_eq!(sol.status, SdpStatus::PrimalInfeasibleDetected);
    }

    #[test]
    fn unbounded_detected() {
        // min -tr(W), W >= 0 with no constraints: unbounded below
        // (dual infeasible).
        let mut p = BlockSdpProblem::new();
        let w = p.add_psd_block("W", 2);
        let mut obj = LinExpr::new();
        for i in 0..2 {
            obj = obj.block_entry(w, i, i, -1.0);
        }
        p.set_objective(obj);
        let sol = solve_default(&p);
        assert_eq!(sol.status, SdpStatus::DualInfeasibleDetected);
    }

    #[test]
    fn degenerate_box_is_equality() {
        // tr(W) in [1, 1] behaves like tr(W) = 1.
        let mut p = BlockSdpProblem::new();
        let w = p.add_psd_block("W", 2);
        p.set_objective(LinExpr::new().block_matrix(w, &SymMatrix::diag(&[1.0, -1.0])));
        p.add_box(LinExpr::new().block_trace(w, 2), 1.0, 1.0);
        let sol = solve_default(&p);
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.primal_objective + 1.0).abs() < 1e-7);
        let (t1, t2) = sol.dual_box_multipliers[0];
        assert!(((t1 + t2) + 1.0).abs() < 1e-5);
    }

    #[test]
    fn two_sided_box_active_lower() {
        // min tr(W) s.t. 1 <= tr(W) <= 2, W >= 0 -> 1, t1 > 0, t2 ~ 0.
        let mut p = BlockSdpProblem::new();
        let w = p.add_psd_block("W", 3);
        p.set_objective(LinExpr::new().block_trace(w, 3));
        p.add_box(LinExpr::new().block_trace(w, 3), 1.0, 2.0);
        let sol = solve_default(&p);
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.primal_objective - 1.0).abs() < 1e-6);
        let (t1, t2) = sol.dual_box_multipliers[0];
        assert!(t1 > 0.9 && t2.abs() < 1e-5);
    }

    #[test]
    fn dual_of_box_sdp_identity_example() {
        // Primal: min <I, W>, 1 <= <I, W> <= 2, W >= 0 (dim 2): optimum 1.
        // Dual: max t1 + 2 t2 s.t. (t1 + t2) I <= I, t1 >= 0, t2 <= 0: optimum 1.
        let mut cost = SparseSymMatrix::new(2);
        cost.push(0, 0, 1.0);
        cost.push(1, 1, 1.0);
        let s = StandardSdp {
            dim: 2,
            cost: cost.clone(),
            constraints: vec![],
            box_row: Some((cost, 1.0, 2.0)),
        };
        let dual = dual_of_box_sdp(&s);
        let sol = solve_default(&dual);
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((-sol.primal_objective - 1.0).abs() < 1e-6);
        // And the primal agrees.
        let psol = solve_default(&s.to_block_problem());
        assert!((psol.primal_objective - 1.0).abs() < 1e-6);
    }

    #[test]
    fn dual_of_trivial_sdp_is_zero() {
        let s = StandardSdp {
            dim: 2,
            cost: SparseSymMatrix::new(2),
            constraints: vec![],
            box_row: None,
        };
        let dual = dual_of_box_sdp(&s);
        let sol = solve_default(&dual);
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!(sol.primal_objective.abs() < 1e-7);
    }

    #[test]
    fn bound_unavailable_for_badly_infeasible_dual() {
        // Build the min-eigenvalue problem, solve it, then wreck the dual
        // equality multiplier by 1 so the slack dips by about 1; the repair
        // would move the objective by ~1 > repair_tol.
        let mut p = BlockSdpProblem::new();
        let w = p.add_psd_block("W", 2);
        p.set_objective(LinExpr::new().block_matrix(w, &SymMatrix::diag(&[1.0, -1.0])));
        p.add_equality(LinExpr::new().block_trace(w, 2), 1.0);
        let mut sol = solve_default(&p);
        sol.dual_equality_multipliers[0] += 1.0;
        let err = certified_lower_bound(&sol, &p, 1e-4).unwrap_err();
        assert!(matches!(err, SdpError::BoundUnavailable(_)));
    }

    #[test]
    fn bound_degrades_gently_under_tiny_perturbation() {
        let mut p = BlockSdpProblem::new();
        let w = p.add_psd_block("W", 2);
        p.set_objective(LinExpr::new().block_matrix(w, &SymMatrix::diag(&[1.0, -1.0])));
        p.add_equality(LinExpr::new().block_trace(w, 2), 1.0);
        let sol = solve_default(&p);
        let b0 = certified_lower_bound(&sol, &p, 1e-4).unwrap();
        let mut sol2 = sol.clone();
        // Push the multiplier so the exact dual slack dips by 1e-9.
        sol2.dual_equality_multipliers[0] += 1e-9;
        let b1 = certified_lower_bound(&sol2, &p, 1e-4).unwrap();
        assert!(b0 - b1 <= 1e-7, "decrease {:.3e}", b0 - b1);
        assert!(b1 <= sol.primal_objective);
    }
}
