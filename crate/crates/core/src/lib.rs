//! Approximate primal-dual solutions for fractional packing and covering LPs.

pub mod bench;
pub mod cli;
pub mod error;
pub mod model;
pub mod oracle;
pub mod sampler;
pub mod scaled;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
