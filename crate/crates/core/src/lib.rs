//! Trip generation for transit travel demand.
//!
//! Each demand (origin, destination, departure time) receives a set of
//! candidate routes merged from a schedule-based planner and from the observed
//! trip history. A Metropolis-Hastings chain with an annealing temperature then
//! picks one candidate per demand so that the distributions of full trip time,
//! transfer time and trip angle ratio over the generated collection approach a
//! set of target distributions.
//!
//! Module map:
//!
//! - [`model`]: stops, legs, routes, demands, candidate sets and chain state.
//! - [`metrics`]: characteristic functions, histograms, targets and the L1 objective.
//! - [`planner`]: compact headway-scheduled network and k-top route search.
//! - [`candidates`]: trip history index and candidate-set construction.
//! - [`sampler`]: the annealed Metropolis-Hastings loop.
//! - [`synth`]: seeded multi-day synthetic smart-card collections.
//! - [`eval`]: mismatch diagnostics and the one-day / online / day-type protocols.
//! - [`formats`]: the text and CSV file formats shared with the command line.

// Comparisons are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod candidates;
pub mod error;
pub mod eval;
pub mod formats;
pub mod metrics;
pub mod model;
pub mod planner;
pub mod sampler;
pub mod synth;

pub use error::{Error, Result};
