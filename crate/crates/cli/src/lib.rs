//! Command-line front end: configuration, orchestration and report emission.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod svg;

pub use config::RunConfig;
pub use error::CliError;
