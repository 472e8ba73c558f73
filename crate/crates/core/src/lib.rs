//! Riesz s-equilibrium measures on strictly self-similar fractals.
//!
//! The crate discretizes a self-similar set into the cells of its
//! iterated function system, assembles the Riesz s-energy as a dense
//! quadratic form over cell masses, and solves the resulting simplex QP.
//! Around that core sit the tools needed to study the limit `s -> d`:
//! ball masses, order-two densities, normalized energies and potentials.
//!
//! Module map:
//!
//! * [`fractal`] - similitudes, the IFS, cell trees and point coding.
//! * [`measure`] - cell measures, ball masses, cell-mass discrepancies.
//! * [`energy`] - energy forms, energies, potentials (two routes).
//! * [`equilibrium`] - the equilibrium solver, s-sweeps, growth profiles.
//! * [`density`] - average and order-two densities, Ahlfors constants.
//! * [`harness`] - experiment configuration, orchestration and reports.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod density;
pub mod energy;
pub mod equilibrium;
pub mod error;
pub mod fit;
pub mod fractal;
pub mod harness;
pub mod measure;

pub use error::{Error, Result};
