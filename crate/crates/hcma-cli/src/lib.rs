//! Command-line runner: configuration, checkpoint persistence, report
//! emission, and the subcommand implementations. The binary in `main.rs` is
//! a thin shell over these modules so integration tests can drive them
//! directly.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod report;
