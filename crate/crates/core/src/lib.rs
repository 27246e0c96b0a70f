//! Explicit, tamed and implicit Euler schemes for SDEs with classical and
//! multilevel Monte Carlo estimators, reference solutions, and diagnostics
//! for the divergence of the multilevel Euler estimator under superlinearly
//! growing drift.

// `!(x > 0.0)` is how validation rejects NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod parallel;
pub mod problems;
pub mod randomness;
pub mod reference;
pub mod schemes;
pub mod stats;

pub use error::{Error, Result};
pub use parallel::Executor;
pub use problems::{Payoff, SdeProblem};
pub use randomness::IncrementGrid;
pub use schemes::{DiscretePath, Scheme};
