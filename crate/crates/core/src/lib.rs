//! Simulation and analysis workbench for quantum coding transitions in qudit
//! chains with a dissipative boundary.
//!
//! * [`stabilizer`]: mixed-state Clifford simulation with GF(2)-rank entropies.
//! * [`protocols`]: circuit schedules (brickwork scrambling, boundary noise,
//!   pre-scrambling, finite code rate) producing mutual-information records.
//! * [`domainwall`]: transfer-matrix evaluation of the annealed Haar average
//!   as a single Ising domain wall pinned by the noisy boundary.
//! * [`analytics`]: closed-form generating functions, critical point,
//!   free energy and scaling estimates.
//! * [`harness`]: sweeps, persistence and scaling-collapse fits.

// `!(a < b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod domainwall;
pub mod error;
pub mod gf2;
pub mod harness;
pub mod protocols;
pub mod rng;
pub mod stabilizer;
pub mod stats;

pub use error::{Error, Result};
