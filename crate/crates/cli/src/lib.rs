//! Library side of the `rotnqs` command line: configuration and presets,
//! output formats, and the command pipelines.

pub mod commands;
pub mod config;
pub mod output;
