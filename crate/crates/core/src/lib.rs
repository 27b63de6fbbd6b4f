//! Planning, scheduling and simulation of hybrid data and pipeline parallel
//! execution over heterogeneous devices with shared network links.

#![no_std]

extern crate alloc;

pub mod adapt;
pub mod env;
pub mod error;
pub mod estimate;
pub mod graph;
pub mod net;
pub mod partition;
pub mod plan;
pub mod sim;

pub use error::{Error, Result};
