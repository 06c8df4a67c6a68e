//! Numerical laboratory for the doubly nonlinear diffusion equation
//! `rho_t = div(|grad rho^m|^{p-2} grad rho^m)` in self-similar variables.
//!
//! The crate covers the exponent algebra, Barenblatt equilibria, a radial
//! finite-volume solver, entropy and Fisher functionals, a weighted
//! Hardy-Poincare eigen-solver and the rate/inequality verification layer.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod barenblatt;
pub mod error;
pub mod exponents;
pub mod functionals;
mod linalg;
mod quad;
pub mod solver;
pub mod spectral;

pub use error::{Error, ErrorKind, Result};
