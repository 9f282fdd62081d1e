//! Small-amplitude breathers of the nonlinear Klein-Gordon equation
//! `phi_tt = phi_xx - phi + U(x) phi^2 + phi^3/6 + p(phi)`.
//!
//! The crate evolves fields in time, solves for time-periodic solutions with a
//! Fourier-in-time Galerkin method, decomposes the dominant harmonic into
//! modulated `4 sech` solitons, and evaluates the second-harmonic resonance
//! integrals that obstruct breathers near a localized potential.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod acceptance;
pub mod banded;
pub mod decompose;
pub mod error;
pub mod evolve;
pub mod fermi;
pub mod grid;
pub mod io;
pub mod model;
pub mod modes;
pub mod solver;
pub mod spectral;

pub use acceptance::CriterionResult;
pub use decompose::DecompositionReport;
pub use error::{Error, Result};
pub use evolve::{EvolveConfig, Scheme};
pub use fermi::GoldenRuleReport;
pub use grid::{FieldState, Grid};
pub use model::{BreatherParams, ModelSpec, Potential, Remainder};
pub use modes::ModeStack;
pub use solver::{BreatherSolution, NewtonConfig};
