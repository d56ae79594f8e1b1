//! Numerical laboratory for nonlinear diffusions with uncertain drift and
//! fixed elliptic volatility.
//!
//! The sublinear semigroup
//!
//! ```text
//! T_t(ψ)(x) = sup_{P ∈ R(x)} E^P[ψ(X_t)]
//! ```
//!
//! is approximated two independent ways: an explicit monotone finite
//! difference scheme for `∂_t u = G(x, u)` ([`pde`]) and backward dynamic
//! programming over frozen controls with Gauss–Hermite transitions ([`dp`]).
//! Admissible policies simulated by Euler–Maruyama give statistical lower
//! bounds ([`mc`]); [`girsanov`] measures the density process that drives the
//! Feller smoothing argument, and [`lab`] runs the semigroup property suites.
//!
//! The crate is `no_std` with `alloc`. The `parallel` feature switches node
//! and path loops to rayon; results do not depend on the worker count.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod catalog;
pub mod dp;
pub mod error;
pub mod girsanov;
pub mod grid;
pub mod lab;
pub mod math;
pub mod mc;
pub mod model;
pub mod pde;
pub mod test_fn;

pub use dp::{DpSolver, FeedbackTable, QuadratureRule};
pub use error::{Error, Result};
pub use grid::{BoxDomain, GridSpec, Lattice, ValueGrid};
pub use lab::{Method, ModulusReport, Semigroup};
pub use mc::{Estimate, PathEnsemble, Policy};
pub use model::{ControlBox, ControlMesh, DiffusionFamily, DriftFamily, Expr, ModelSpec, Verdict};
pub use pde::ExplicitScheme;
pub use test_fn::{Regularity, TestFunction};

/// Largest state dimension handled by the model and the path simulators.
/// Grid solvers are further restricted to `d ∈ {1, 2}`.
pub const MAX_DIM: usize = 4;
