//! Simulation and analysis of a self-excited oscillator with a
//! velocity-dependent delay, whose limit cycles form an unbounded nested
//! ("megastable") family of quantized orbits.
//!
//! - [`dde`]: fixed-step RK4 integration with dense Hermite output.
//! - [`models`]: the delayed system, its low-memory reduction, pulse forcing
//!   and Lyapunov energy.
//! - [`averaging`]: Bessel functions, averaged radial equation, radius and
//!   frequency predictions.
//! - [`analysis`]: orbit detection, catalogs, energy/frequency statistics and
//!   the windowed response amplitude.
//! - [`experiments`]: driven transitions and parameter sweeps.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod averaging;
pub mod dde;
pub mod experiments;
pub mod models;

pub use dde::{DenseTrajectory, IntegratorConfig, State};
pub use models::{PulseParams, SystemParams};
