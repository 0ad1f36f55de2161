//! Rotational quantum dynamics for linear and symmetric-top molecules driven
//! by THz and nonresonant laser pulses.
//!
//! The crate covers the full chain from spectroscopic inputs to optimized
//! control fields:
//!
//! * [`units`] — conversions from lab units (cm⁻¹, Debye, TW/cm², V/m, fs, K)
//!   into the internal atomic-unit system (ħ = 1), and molecular parameters.
//! * [`basis`] — truncated |j,m⟩ / |j,k,m⟩ bases and exact operator matrices
//!   for cosθ, cos²θ and the field-free Hamiltonian.
//! * [`targets`] — the merit operator cosθ − a·cos²θ, its classical optimum,
//!   and the truncated-space target states that are simultaneously oriented
//!   and planar-delocalized.
//! * [`pulses`] — analytic field envelopes (Gaussian THz, half-cycle,
//!   single-cycle, laser intensity kicks), sequences, and a piecewise-constant
//!   override channel for optimized fields.
//! * [`dynamics`] — unitary propagation of pure states and Boltzmann
//!   ensembles on uniform time grids, plus exact field-free evolution.
//! * [`oct`] — gradient-based optimization of the THz channel to maximize the
//!   projection of the final state onto a target state.
//!
//! All internal quantities are atomic units; conversions happen at the edges.

// input validation uses the negated forms (`!(x > 0.0)`) so NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod oct;
pub mod pulses;
pub mod targets;
pub mod units;

pub use error::{Result, RotorError};
