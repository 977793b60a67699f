//! Property tests for the linear-algebra kernels, the rank surrogate, SDP
//! duality, and the finite-scale equivalences behind the penalized
//! objective.

use proptest::prelude::*;
use ranksdp::linalg::{solve_spd, svd, DenseMatrix, SymMatrix};
use ranksdp::rank_approx::{phi_direct, phi_result, phi_sv, rank_gap};
use ranksdp::rankmin::{brute_force_min_rank, penalized_rank_objective};
use ranksdp::sdp::{
    dual_of_box_sdp, solve, SdpStatus, SolverOptions, SparseSymMatrix, StandardSdp,
};

fn dense_strategy(max_dim: usize) -> impl Strategy<Value = DenseMatrix> {
    (1..=max_dim, 1..=max_dim).prop_flat_map(|(m, n)| {
        proptest::collection::vec(-3.0..3.0f64, m * n)
            .prop_map(move |data| DenseMatrix::new(m, n, data).unwrap())
    })
}

/// Random orthogonal matrix from the eigenvectors of a random symmetric one.
fn orthogonal_from(seed_mat: &SymMatrix) -> DenseMatrix {
    ranksdp::linalg::sym_eig(seed_mat).unwrap().vectors
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn svd_reconstructs(x in dense_strategy(30)) {
        let d = svd(&x).unwrap();
        let (m, n) = (x.rows(), x.cols());
        let rec = DenseMatrix::from_fn(m, n, |i, j| {
            (0..d.sigma.len())
                .map(|k| d.u.get(i, k) * d.sigma[k] * d.v.get(j, k))
                .sum()
        });
        let scale = x.frobenius_norm().max(1e-30);
        prop_assert!(rec.sub(&x).frobenius_norm() <= 1e-10 * scale.max(1.0));
        let uerr = d.u.transpose().matmul(&d.u).sub(&DenseMatrix::identity(m)).max_abs();
        let verr = d.v.transpose().matmul(&d.v).sub(&DenseMatrix::identity(n)).max_abs();
        prop_assert!(uerr < 1e-12 && verr < 1e-12);
    }

    #[test]
    fn eigenvalues_invariant_under_conjugation(
        (a, q_seed) in (1usize..=7).prop_flat_map(|n| {
            (
                proptest::collection::vec(-3.0..3.0f64, n * (n + 1) / 2)
                    .prop_map(move |u| SymMatrix::new(n, u).unwrap()),
                proptest::collection::vec(-3.0..3.0f64, n * (n + 1) / 2)
                    .prop_map(move |u| SymMatrix::new(n, u).unwrap()),
            )
        })
    ) {
        let n = a.dim();
        let q = orthogonal_from(&q_seed);
        let ad = a.to_dense();
        let conj = q.transpose().matmul(&ad).matmul(&q);
        let conj_sym = SymMatrix::from_dense(&conj).unwrap();
        let e1 = ranksdp::linalg::sym_eig(&a).unwrap().values;
        let e2 = ranksdp::linalg::sym_eig(&conj_sym).unwrap().values;
        for k in 0..n {
            prop_assert!((e1[k] - e2[k]).abs() <= 1e-9 * (1.0 + a.frobenius_norm()));
        }
    }

    #[test]
    fn spd_solve_round_trips(
        (b, seed) in (1usize..=6, 1usize..=6).prop_flat_map(|(n, c)| {
            (
                proptest::collection::vec(-3.0..3.0f64, n * c)
                    .prop_map(move |d| DenseMatrix::new(n, c, d).unwrap()),
                proptest::collection::vec(-3.0..3.0f64, n * (n + 1) / 2)
                    .prop_map(move |u| SymMatrix::new(n, u).unwrap()),
            )
        })
    ) {
        let n = b.rows();
        // SPD from seed: S'S + I
        let sd = seed.to_dense();
        let g = sd.transpose().matmul(&sd);
        let a = SymMatrix::from_fn(n, |i, j| g.get(i, j) + if i == j { 1.0 } else { 0.0 });
        let x = solve_spd(&a, &b).unwrap();
        let res = a.to_dense().matmul(&x).sub(&b).frobenius_norm();
        prop_assert!(res <= 1e-9 * b.frobenius_norm().max(1.0));
    }

    #[test]
    fn phi_monotone_and_bounded(x in dense_strategy(8), e1 in 1e-4..10.0f64, ratio in 0.05..0.95f64) {
        prop_assume!(x.frobenius_norm() > 1e-6);
        let e2 = e1 * ratio; // e2 < e1
        let p1 = phi_direct(&x, e1).unwrap();
        let p2 = phi_direct(&x, e2).unwrap();
        prop_assert!(p2 > p1 - 1e-12, "phi must increase as eps decreases");
        let r = phi_result(&x, e1).unwrap();
        prop_assert!(p1 <= r.numerical_rank as f64 + 1e-10);
        prop_assert!(r.value >= 0.0);
    }

    #[test]
    fn phi_two_routes_agree(x in dense_strategy(8), eps in 1e-4..10.0f64) {
        let direct = phi_direct(&x, eps).unwrap();
        let sv = svd(&x).unwrap();
        let via_sigma = phi_sv(&sv.sigma, eps).unwrap();
        let tol = 1e-9 * (x.rows().min(x.cols()) as f64);
        prop_assert!((direct - via_sigma).abs() <= tol, "{direct} vs {via_sigma}");
    }

    #[test]
    fn rank_gap_middle_equality(x in dense_strategy(8), eps in 1e-3..10.0f64) {
        let r = phi_result(&x, eps).unwrap();
        let (gap_exact, gap_upper) = rank_gap(&x, eps).unwrap();
        prop_assert!(gap_exact >= -1e-12 && gap_exact <= gap_upper + 1e-12);
        prop_assert!((r.numerical_rank as f64 - r.value - gap_exact).abs() <= 1e-9);
    }

    #[test]
    fn phi_orthogonally_invariant(
        (x, p_seed, q_seed) in (1usize..=6, 1usize..=6).prop_flat_map(|(m, n)| {
            (
                proptest::collection::vec(-3.0..3.0f64, m * n)
                    .prop_map(move |d| DenseMatrix::new(m, n, d).unwrap()),
                proptest::collection::vec(-3.0..3.0f64, m * (m + 1) / 2)
                    .prop_map(move |u| SymMatrix::new(m, u).unwrap()),
                proptest::collection::vec(-3.0..3.0f64, n * (n + 1) / 2)
                    .prop_map(move |u| SymMatrix::new(n, u).unwrap()),
            )
        }),
        eps in 1e-3..10.0f64,
    ) {
        let p = orthogonal_from(&p_seed);
        let q = orthogonal_from(&q_seed);
        let rotated = p.matmul(&x).matmul(&q);
        let a = phi_direct(&x, eps).unwrap();
        let b = phi_direct(&rotated, eps).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
    }
}

// Finite-scale equivalence of rank and penalized-rank minimization over a
// norm annulus: any minimizer of rank(X) + (1/eta) ||X||_F^2 over
// candidates normalized into the annulus attains the minimum rank once the
// penalty is weak enough. The threshold that actually makes the exchange
// argument work is eta > gamma2^2 - gamma1^2 (the squared-norm spread): a
// rank swap changes the objective by at least 1 - (gamma2^2 - gamma1^2)/eta.
// (With eta merely above gamma2 - gamma1, a rank-1 candidate at norm 2 loses
// to a rank-2 candidate at norm 1 under eta = 1.25.)
proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn penalized_objective_picks_minimum_rank(
        seeds in proptest::collection::vec((dense_strategy(4), 1u8..4), 2..6),
        g1 in 0.5..1.5f64,
        width in 0.1..1.0f64,
    ) {
        let g2 = g1 + width;
        // Build candidates with controlled rank and norms inside [g1, g2].
        let mut candidates = Vec::new();
        for (k, (seed, r)) in seeds.iter().enumerate() {
            let m = seed.rows();
            let n = seed.cols();
            let r = (*r as usize).min(m).min(n);
            // rank-r product from the seed's SVD factors
            let d = svd(seed).unwrap();
            if d.sigma[..r.min(d.sigma.len())].iter().any(|&s| s < 1e-6) {
                continue;
            }
            let x = DenseMatrix::from_fn(m, n, |i, j| {
                (0..r).map(|t| d.u.get(i, t) * d.sigma[t] * d.v.get(j, t)).sum()
            });
            let norm = x.frobenius_norm();
            if norm < 1e-9 {
                continue;
            }
            let target = g1 + (g2 - g1) * (k as f64 + 0.5) / seeds.len() as f64;
            candidates.push(x.scaled(target / norm));
        }
        prop_assume!(!candidates.is_empty());

        let eta = (g2 * g2 - g1 * g1) + 0.25;
        let brute = brute_force_min_rank(&candidates).unwrap();
        let best = candidates
            .iter()
            .min_by(|a, b| {
                penalized_rank_objective(a, eta)
                    .unwrap()
                    .partial_cmp(&penalized_rank_objective(b, eta).unwrap())
                    .unwrap()
            })
            .unwrap();
        let best_rank = svd(best).unwrap().numerical_rank();
        prop_assert_eq!(best_rank, brute.min_rank);

        // Norm-independence at finite scale: rescaling the annulus (and the
        // candidates with it) leaves the minimum rank unchanged.
        let scale = 3.7;
        let rescaled: Vec<DenseMatrix> = candidates.iter().map(|c| c.scaled(scale)).collect();
        let brute2 = brute_force_min_rank(&rescaled).unwrap();
        prop_assert_eq!(brute.min_rank, brute2.min_rank);
    }
}

// Box-SDP duality: on random box-constrained standard forms with
// strictly interior primal and dual points by construction, the dual
// problem's optimum matches the primal optimum.
proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn box_sdp_dual_matches_primal(
        dim in 1usize..5,
        l in 0usize..3,
        entries in proptest::collection::vec(-1.0..1.0f64, 64),
        y0 in proptest::collection::vec(-1.0..1.0f64, 3),
    ) {
        let mut idx = 0usize;
        let mut next = || {
            let v = entries[idx % entries.len()];
            idx += 1;
            v
        };
        let rand_sym = |next: &mut dyn FnMut() -> f64| {
            let mut m = SparseSymMatrix::new(dim);
            for i in 0..dim {
                for j in i..dim {
                    m.push(i, j, next());
                }
            }
            m
        };

        // Interior primal point W0 = I + R'R
        let r = DenseMatrix::from_fn(dim, dim, |_, _| next());
        let g = r.transpose().matmul(&r);
        let w0 = SymMatrix::from_fn(dim, |i, j| g.get(i, j) + if i == j { 1.0 } else { 0.0 });

        let constraints: Vec<(SparseSymMatrix, f64)> = (0..l)
            .map(|_| {
                let c = rand_sym(&mut next);
                let b = c.inner(&w0);
                (c, b)
            })
            .collect();
        let box_mat = rand_sym(&mut next);
        let mid = box_mat.inner(&w0);
        let box_row = Some((box_mat.clone(), mid - 1.0, mid + 1.0));

        // Dual-interior cost: C0 = A*(y0) + (t1 + t2) C + S0, S0 = 2I.
        let mut cost = SparseSymMatrix::new(dim);
        for (k, (c, _)) in constraints.iter().enumerate() {
            for &(i, j, v) in &c.entries {
                cost.push(i, j, v * y0[k % y0.len()]);
            }
        }
        let (t10, t20) = (0.5, -0.3);
        for &(i, j, v) in &box_mat.entries {
            cost.push(i, j, v * (t10 + t20));
        }
        for i in 0..dim {
            cost.push(i, i, 2.0);
        }

        let s = StandardSdp { dim, cost, constraints, box_row };
        let opts = SolverOptions::default();
        let psol = solve(&s.to_block_problem(), &opts).unwrap();
        let dsol = solve(&dual_of_box_sdp(&s), &opts).unwrap();
        prop_assume!(psol.status == SdpStatus::Optimal && dsol.status == SdpStatus::Optimal);
        let dual_value = -dsol.primal_objective;
        // weak duality exactly, strong duality to solver accuracy
        prop_assert!(dual_value <= psol.primal_objective + 1e-6);
        prop_assert!(
            (dual_value - psol.primal_objective).abs()
                <= 1e-6 * (1.0 + psol.primal_objective.abs()),
            "primal {} vs dual {}",
            psol.primal_objective,
            dual_value
        );
    }
}
