//! Label-level simulation of a quantum hidden-shift sieve and the
//! average-case d-dimensional pattern-matching pipeline built on it.
//!
//! The quantum parts are simulated exactly at the level of phase labels.
//! Every procedure records what it actually read and, separately, the
//! query count the quantum algorithm would be charged (see [`ledger`]).

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod baseline;
pub mod error;
pub mod gf2;
pub mod grid;
pub mod instances;
pub mod ledger;
pub mod matcher;
pub mod rng;
pub mod sieve;
pub mod stats;

pub use error::{Error, Result};
pub use grid::GridString;
pub use ledger::{QueryLedger, Role};
pub use rng::SeedTree;
