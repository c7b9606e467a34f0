//! Config parsing, sweep execution and file emission behind the `lzc`
//! command-line tool.

pub mod config;
pub mod output;
pub mod presets;
pub mod runner;
