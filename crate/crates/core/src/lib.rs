//! Simulation laboratory for fully device-independent quantum key distribution.
//!
//! The crate is organised bottom-up:
//!
//! * [`qsim`] exact two-qubit density-matrix simulation,
//! * [`devices`] black-box device pairs (honest and adversarial),
//! * [`protocol`] the two-party key distribution state machine and its public transcript,
//! * [`recon`] information reconciliation with exact leakage accounting,
//! * [`extract`] privacy amplification (Toeplitz hashing and a Trevisan extractor),
//! * [`analysis`] closed-form bounds, behaviour-table checkers and exhaustive oracles,
//! * [`eve`] transcript-reading eavesdroppers and empirical security reports.

pub mod analysis;
pub mod bits;
pub mod devices;
mod error;
pub mod eve;
pub mod extract;
pub mod protocol;
pub mod qsim;
pub mod recon;
pub mod rng;

pub use error::{Error, Result};
