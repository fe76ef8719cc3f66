//! File formats, instance generators, verification, benchmarking and SVG
//! output behind the `gpm` command.

pub mod bench;
pub mod format;
pub mod generate;
pub mod plot;
pub mod verify;

pub use format::{Format, Instance, Solution};
