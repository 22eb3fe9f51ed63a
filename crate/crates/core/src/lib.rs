//! Zero-intelligence and generalized zero-intelligence limit order book
//! models: exact simulation, conditional densities of best-ask jumps given
//! the L1 history, and maximum-likelihood estimation of the in-book
//! intensities from tick data.

pub mod data_io;
pub mod density;
pub mod error;
pub mod estimator;
pub mod model;
pub mod par;
pub mod report;
pub mod rng;
pub mod simulator;

pub use error::{LobError, Result};
