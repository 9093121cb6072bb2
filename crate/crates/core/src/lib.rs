//! Privacy amplification bounds for local randomizers in the single-message
//! shuffle model.
//!
//! The pipeline is: describe a randomizer ([`randomizers`]), build its
//! optimal clone decomposition ([`decomposition`]), turn that into an
//! amplification random variable ([`gparv`]), and evaluate the shuffled
//! divergence by discretized n-fold convolution ([`amplifier`]).
//! [`mechanism`] assembles composed mechanisms for the command line.

pub mod amplifier;
pub mod cli;
pub mod decomposition;
pub mod error;
pub mod gparv;
pub mod mechanism;
pub mod probdist;
pub mod randomizers;

pub use error::{Error, Result};
