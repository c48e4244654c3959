//! Variation of constants for perturbed Keplerian motion.
//!
//! The crate is organised around the classical pipeline:
//!
//! * [`dynsys`] — flows of time-dependent vector fields on `R^n`, flow
//!   Jacobians, and an adaptive Dormand–Prince 5(4) integrator.
//! * [`kepler`] — the unperturbed two-body model: vector field, first
//!   integrals, orbital elements and analytic propagation.
//! * [`motions`] — the epoch-parametrised diffeomorphism between element
//!   space (a chart on the manifold of motions) and phase space, with its
//!   finite-difference and analytic Jacobians.
//! * [`brackets`] — Lagrange parentheses, Poisson brackets, their matrix
//!   duality, and the residual checks for symplectic structure.
//! * [`varconst`] — element-rate equations in both the linear-solve and the
//!   Poisson form, osculating-element integration, trajectory
//!   reconstruction, and the direct-integration oracle.
//! * [`verify`] — the named check suite used by the CLI `verify` command
//!   and the acceptance tests.
//!
//! Sign convention: Poisson brackets throughout use
//! `{a,b} = Σ ∂a/∂p ∂b/∂q − ∂a/∂q ∂b/∂p`, which is the negative of the
//! most common modern convention. With it, the matrix of Lagrange
//! parentheses and the matrix of Poisson brackets are exact inverses
//! (`L·P = I`) and Hamilton's equation reads `dg/dt = {H,g}`.

pub mod brackets;
pub mod dynsys;
pub mod kepler;
pub mod motions;
pub mod varconst;
pub mod verify;
