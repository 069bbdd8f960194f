//! Capacity and achievable information rates of unitary MIMO-AWGN
//! channels (the dual-polarization optical channel with random
//! polarization drift) under perfect and imperfect channel knowledge.
//!
//! - [`linalg`]: small dense complex matrices, SVD, Haar sampling.
//! - [`channel`]: channel parameters, constellations, pilots, transmission.
//! - [`estimators`]: least-squares and Kabsch (unitary) channel estimates.
//! - [`air`]: capacity, mutual information and mismatched-decoding rates.
//! - [`experiments`]: reproducible parameter sweeps.
//! - [`cli`]: the command-line front end.

pub mod air;
pub mod channel;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod linalg;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
