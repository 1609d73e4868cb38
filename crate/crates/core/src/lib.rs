//! Permanental point processes and the real Monge-Ampère second boundary value problem.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: the target convex body `P`, its scaled lattice points, support function,
//!   barycenter and the invariant `R`.
//! - [`convexcalc`]: grid Legendre transforms, the `P`-constrained convex envelope, Alexandrov
//!   Monge-Ampère measures, the energy functional and the comparison/domination checks.
//! - [`permanent`]: log-domain permanents of the transport kernels, marginal matrices, gradients,
//!   the N-particle Hamiltonian and the assignment sandwich bounds.
//! - [`assignment`]: optimal assignments, the Birkhoff LP, Wasserstein-1 and semi-discrete costs.
//! - [`gibbs`]: the β-deformed permanental point process: exact small instances, MCMC and the
//!   Monte-Carlo potential and transport-map estimators.
//! - [`meanfield`]: the π_N operator, balanced functions, free energies and the 1D Monge-Ampère
//!   solver.
//! - [`langevin`]: the interacting diffusion whose stationary law is the Gibbs measure.
//! - [`suite`]: the acceptance checks, shared by the test suite and the `verify` command.

// `!(x > 0.0)` rejects NaN together with the out-of-range values; indexed loops mirror the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod assignment;
pub mod convexcalc;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod gibbs;
pub mod langevin;
pub mod meanfield;
pub mod numeric;
pub mod permanent;
pub mod rng;
pub mod suite;

pub use error::{Error, Result};
