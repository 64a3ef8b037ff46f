//! Finite-blocklength simulation of classical-quantum Gel'fand-Pinsker
//! coding where the encoder sees a rate-limited description of the state.

pub mod baselines;
pub mod cli;
pub mod error;
pub mod infospec;
pub mod model;
pub mod protocol;
pub mod qop;

pub use error::{Error, Result};
