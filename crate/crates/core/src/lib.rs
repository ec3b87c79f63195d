//! Capacity–delay analytics for secondary (delay-tolerant) traffic carried
//! on the spare capacity of a multi-band cellular network, together with
//! Monte Carlo oracles that check every approximation in the chain.
//!
//! The chain runs geometry → equilibrium → queueing → capacity:
//! coverage and fair-access probabilities from stochastic geometry feed a
//! fixed point for the service probability ε, which in turn parameterizes
//! a two-class preemptive-resume priority queue for the delay.

pub mod capacity;
pub mod equilibrium;
pub mod error;
pub mod geometry;
pub mod numerics;
pub mod queueing;
pub mod simulate;

pub use error::{Error, Result};
