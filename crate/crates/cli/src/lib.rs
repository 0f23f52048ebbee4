//! Configuration and reporting behind the `codesign` binary.

pub mod config;
pub mod report;
