//! Simulation lab for local SGD with periodic averaging (LUPA-SGD).
//!
//! `p` workers run `τ` local SGD steps on their own model copies, average the
//! copies, and repeat until `T` total steps per worker. The crate provides:
//!
//! * [`objectives`] — loss functions with exact value/gradient oracles and
//!   declared smoothness/PL/variance constants,
//! * [`data`] — synthetic datasets, LIBSVM ingestion, and deterministic
//!   per-(worker, round, step) mini-batch streams,
//! * [`schedules`] — learning-rate schedules, synchronization-period
//!   schedules, the α feasibility solver, and τ selection formulas,
//! * [`engine`] — the deterministic multi-worker simulator and its traces,
//! * [`analysis`] — closed-form convergence bounds and the empirical checks
//!   that compare them against simulated trajectories,
//! * [`config`] — serializable run descriptions used by the CLI.

// negated float comparisons are deliberate: `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod data;
pub mod engine;
mod error;
pub mod objectives;
pub mod schedules;
pub(crate) mod vecmath;

pub use error::{Error, Result};
