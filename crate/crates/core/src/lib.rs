//! Finite-sample inference for sparsely permuted linear regression.
//!
//! Observations follow `Y = Π₀Xβ₀ + σ₀u` where the permutation `Π₀` moves at
//! most `k` rows. The crate localises `Π₀` with repro samples solved by a
//! score-weighted linear assignment, tests how many rows are mismatched, and
//! builds confidence regions for `β₀` that account for the unknown matching.

pub mod assignment;
pub mod candidates;
pub mod cli;
pub mod error;
pub mod inference;
pub mod io;
pub mod numerics;
pub mod permutation;
pub mod report;
pub mod simulate;
pub mod tuning;

pub use error::{Error, Result};
