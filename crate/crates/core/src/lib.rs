//! Sampling discretization and sparse least-squares recovery.
//!
//! The crate verifies universal discretization of dictionaries on point
//! sets, runs weighted and sparse least-squares recovery, computes best
//! v-term approximation quantities and greedy approximants, builds
//! lower-bound witnesses, and drives reproducible experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod classes;
pub mod dictionary;
pub mod error;
pub mod experiments;
pub mod frequency;
pub mod discretization;
pub mod linalg;
pub mod lower_bounds;
pub mod minimax;
pub mod oracles;
pub mod recovery;
pub mod report;
pub mod workspace;

pub use error::{Error, Result};
pub use linalg::C64;
