//! Estimation of controlled Markov chain (CMC) transition matrices from a
//! single trajectory.
//!
//! The crate is `no_std` with `alloc`. It contains every algorithmic piece:
//!
//! - [`model`]: validated CMC models, stationary distributions, paired chains
//! - [`policy`]: the five logging-policy classes that generate controls
//! - [`simulate`]: the direct and array-based trajectory samplers, return times
//! - [`estimate`]: visit counts and the empirical transition estimator
//! - [`exact`]: exact path laws of both samplers by full enumeration
//! - [`mixing`]: exact mixing coefficients by full path enumeration
//! - [`bounds`]: closed-form sample-complexity thresholds and tail bounds
//! - [`hardness`]: minimax hard-instance families and touring times
//! - [`ope`]: Bellman solves, plug-in evaluation and greedy-data recovery
//! - [`presets`]: named instances used by experiments and tests
//!
//! IO, file formats, parallel experiment drivers and the command line live in
//! the `cmc-tools` crate.
//!
//! Indices are 0-based everywhere. A state-control pair `(s, l)` is flattened
//! to `s * k + l` whenever a single index over `χ × 𝕀` is needed.
#![no_std]
#![forbid(unsafe_code)]
// Negated comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bounds;
pub mod error;
pub mod estimate;
pub mod exact;
pub mod hardness;
pub mod matrix;
pub mod mixing;
pub mod model;
pub mod ope;
pub mod policy;
pub mod presets;
pub mod rng;
pub mod simulate;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use model::{CmcModel, Distribution, StateControl};
pub use policy::LoggingPolicy;
pub use simulate::{InitialLaw, Trajectory};

/// Version of this crate, recorded in output metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
