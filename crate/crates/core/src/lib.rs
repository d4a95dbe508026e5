//! Coarse-graining tools for atom chains and for overdamped Langevin
//! dynamics along a reaction coordinate.

pub mod error;
pub mod grid;
pub mod potentials;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub mod chain_mc;
pub mod chain_nn;
pub mod sde;
pub mod transfer_operator;
pub mod chain_nnn;
pub mod cg_dynamics;
pub mod fp1d;
pub mod cli;
