//! Optimal parent Hamiltonians for time-dependent pure states.
//!
//! Given a path of pure states ρ(t) and a list of allowed Hermitian
//! interactions L_a, the crate finds the couplings h_a(t) minimizing
//! ‖∂ₜρ + i[H, ρ]‖ with H = Σ h_a L_a, evolves the state under the result and
//! reports cost, fidelity and accessibility diagnostics.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod counterdiabatic;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod operators;
pub mod paths;
pub mod selftest;
pub mod solver;

pub use error::{Error, Result};
