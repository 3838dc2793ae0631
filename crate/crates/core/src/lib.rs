#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

//! Uplink throughput evaluation and association optimization for an integrated
//! LEO satellite + cell-free massive MIMO network.
//!
//! The crate is layered bottom-up:
//!
//! - [`geometry`] builds the layout and every large-scale channel statistic, and
//!   samples small-scale fading.
//! - [`estimation`] runs the uplink pilot phase and MMSE channel estimation.
//! - [`throughput`] evaluates per-user SINR and rate, either in closed form (MRC) or
//!   with a use-and-then-forget Monte-Carlo estimator.
//! - [`fairness`] maps genomes to association patterns and scores them with one of
//!   three utilities.
//! - [`exhaustive`], [`ga`] and [`hga`] search the association (and power) space.
//! - [`io`] holds configuration, seeded random streams and report writers.
//! - [`experiments`] composes the above into the experiment drivers used by the CLI.

pub mod error;
pub mod estimation;
pub mod exhaustive;
pub mod experiments;
pub mod fairness;
pub mod ga;
pub mod geometry;
pub mod hga;
pub mod io;
pub mod linalg;
pub mod throughput;

pub use error::{Error, Result};
pub use fairness::{FitnessEvaluator, Genome, UtilityKind};
pub use geometry::{NetworkScenario, RadioConstants};
pub use io::config::SimConfig;
pub use throughput::{AssociationPattern, LinkStatistics, PowerAllocation};
