//! Monte Carlo simulation of site-resolved error detection, state
//! preparation, and erasure conversion for molecules in an optical tweezer
//! array.
//!
//! Each site carries a coarse internal-state bin plus a Bloch vector for
//! the hyperfine qubit. Instruments act on sites, and the dynamics module
//! evolves them between operations. Schedules are parsed from a small
//! script language and executed deterministically from a master seed.

pub mod analysis;
pub mod dynamics;
pub mod engine;
mod error;
pub mod instruments;
pub mod params;
pub mod reproduce;
pub mod rng;
pub mod state;

pub use error::{Error, Result};
pub use params::PhysicsParams;
pub use state::{Bloch, Partition, PartitionClass, SiteState, StateBin};
