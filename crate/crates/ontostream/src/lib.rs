//! Std companion of the engine core: file formats on disk, replayed
//! stream IO, the partitioned parallel runner, the benchmark harness, and
//! the command-line interface.

pub mod bench;
pub mod cli;
pub mod files;
pub mod parallel;
pub mod synth;

pub use ontostream_core as core;
