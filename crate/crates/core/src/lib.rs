//! Capacity planning for many-server queues with impatient customers and
//! idle-server priority thresholds.
//!
//! * [`erlang`]: exact Erlang-A (M/M/N+M) steady state.
//! * [`staffing`]: QD, ED and square-root (QED) bed counts, plus exact searches.
//! * [`thresholds`]: per-class entry thresholds, analytic or calibrated by simulation.
//! * [`population`]: vulnerability groups and per-class arrival rates.
//! * [`desim`]: event-driven simulation with threshold admission.
//! * [`experiments`]: replications, comparisons and sweeps.
//! * [`cli`]: scenario files and the command-line front end.

// `!(x > 0.0)` is used on purpose: it rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod desim;
pub mod erlang;
pub mod error;
pub mod experiments;
pub mod population;
pub mod staffing;
pub mod thresholds;

pub use error::{Error, Result};
