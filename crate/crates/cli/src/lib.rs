//! Library half of the `air` binary: config parsing, the experiment
//! pipeline, and artifact writers. The integration suites drive training
//! through this crate so that tests and the CLI share one code path.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod harness;
pub mod model_io;
