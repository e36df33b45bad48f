//! Hermite-spectral solver for the scaled Vlasov-Fokker-Planck /
//! compressible Navier-Stokes system on a periodic interval, together with
//! the Navier-Stokes-Smoluchowski limit, the Hilbert-type expansion around
//! it, and the energy functionals used to monitor convergence.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod velocity_basis;
pub mod spatial_grid;
pub mod linalg;
pub mod fluid_core;
pub mod kinetic_solver;
pub mod expansion;
pub mod diagnostics;
pub mod harness;

pub use error::{Result, SimError};
