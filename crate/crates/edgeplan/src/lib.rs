//! File formats, pipelines and the command-line interface around
//! [`edgeplan_core`].

pub mod cli;
pub mod doc;
pub mod gen;
pub mod pipeline;

pub use edgeplan_core as core;
