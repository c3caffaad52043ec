//! Phase-space Bell tests with displaced photon counting.
//!
//! A single photon split on a balanced beam splitter is probed by two
//! apparatuses that displace their mode and count photons. No-click
//! statistics sample the joint Q-function, parity statistics the joint Wigner
//! function; both feed Bell combinations (CH and a CHSH-type sum) that the
//! state violates.

pub mod bell;
pub mod cli;
pub mod error;
pub mod fock;
pub mod measurement;
pub mod models;
pub mod optimize;
pub mod oracles;
pub mod sim;
pub mod states;
pub mod verify;

pub use error::{Error, Result};
