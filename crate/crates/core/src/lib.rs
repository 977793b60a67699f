//! Smooth rank surrogates, rank minimization over affine sets, and
//! zero-solution certificates for homogeneous quadratic systems.
//!
//! The crate is organized around a small dense linear-algebra layer and a
//! dense block-SDP interior-point solver:
//!
//! * [`linalg`] — dense symmetric eigendecomposition, SVD, and SPD solves.
//! * [`rank_approx`] — the surrogate `phi_eps(X) = tr(X (X'X + eps I)^-1 X')`,
//!   its exact error bounds, and a finite scheme that recovers `rank(X)`.
//! * [`sdp`] — block SDP modeling, a primal-dual path-following solver with
//!   Mehrotra predictor-corrector steps, certified dual lower bounds, a
//!   single-block standard-form compiler, and SDPA export.
//! * [`rankmin`] — penalized SDP approximations of rank minimization over
//!   affine sets, epsilon-continuation, and a nuclear-norm baseline.
//! * [`quadcert`] — certificates that `x' A_i x = 0 (i = 1..m)` admits only
//!   the zero solution, via SDP relaxation, duality, and a counterexample
//!   search oracle.

pub mod linalg;
pub mod quadcert;
pub mod rank_approx;
pub mod rankmin;
pub mod sdp;

pub use linalg::{DenseMatrix, SymMatrix};
