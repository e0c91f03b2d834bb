//! Quantum agnostic learning over finite hypothesis classes, simulated exactly.
//!
//! The crate estimates the risk of each hypothesis with amplitude estimation
//! (median of repeated runs), picks the minimizer, and compares the number of
//! state-preparation calls it needs against classical empirical risk
//! minimization with a Hoeffding sample size. Every distribution is finite, so
//! all risks are known exactly and success can be decided without noise.

pub mod bench;
pub mod classical;
pub mod engine;
pub mod error;
pub mod estimator;
pub mod learner;
pub mod problem;
pub mod seed;
pub mod verify;

pub use error::{QalError, Result};
