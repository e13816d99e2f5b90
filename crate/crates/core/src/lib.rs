//! Single-photon emission spectra of two dipole-coupled atoms in an
//! optomechanical cavity: open-system numerics plus a dressed-state oracle.

pub mod cli;
pub mod dressed;
pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod model;
pub mod spectrum;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
