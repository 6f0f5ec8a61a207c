pub mod analysis;
pub mod bump;
pub mod chain;
pub mod config;
pub mod criteria;
pub mod error;
pub mod jet;
pub mod lattice;
pub mod phase;
pub mod pipeline;
pub mod potential;
pub mod quad;
pub mod schedule;
pub mod spectral;

pub use error::{Error, Result};
