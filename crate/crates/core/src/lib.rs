//! Reward-augmented multi-agent imitation learning.
//!
//! A shared stochastic driving policy is trained adversarially against a
//! Wasserstein-style critic, with designer-specified penalties subtracted
//! from the critic reward so that undesired state-action pairs (collisions,
//! off-road driving, hard braking) are pushed out of the learned occupancy
//! measure.
//!
//! The crate is `no_std` + `alloc`. Everything here is pure computation:
//! file formats, the command line, and worker parallelism live in the `rail`
//! companion crate. Enable the `std` feature to get `std::error::Error` on
//! [`Error`].

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod config;
pub mod critic;
mod error;
pub mod math;
pub mod metrics;
pub mod numerics;
pub mod penalty;
pub mod policy;
pub mod sim;
pub mod theory;
pub mod trainer;
pub mod trpo;

pub use error::{Error, Result};

/// Seeded generator used throughout; `ChaCha8` gives identical streams on
/// every platform.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Build the crate RNG from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}
