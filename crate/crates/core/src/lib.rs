//! Deep Picard iteration for high-dimensional parabolic PDEs.
//!
//! Each iteration labels points with Monte Carlo estimates of the value and
//! gradient of the Picard map applied to the current iterate, then fits a
//! tanh network to both by gradient-augmented regression.

// Negated comparisons are how NaN inputs get rejected, and index loops read
// closest to the formulas they implement.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod eval;
pub mod io;
pub mod labels;
pub mod net;
pub mod picard;
pub mod problems;
pub mod rng;
pub mod sde;

pub use error::{DpiError, Result};
pub use labels::{FrozenSolution, LabelMode, LabeledPoint};
pub use net::Network;
pub use picard::{dpi_solve, DpiConfig, RunReport, SolveOptions};
pub use problems::{Problem, SolutionFn};
pub use rng::{Purpose, SeedStream};
pub use sde::{InitialLaw, SdeKind, SdeModel};
