//! Scenario files, CSV ingestion, closed-loop runs and report bundles for the `recopt` binary.

pub mod commands;
pub mod config;
mod error;
pub mod ingest;
pub mod report;

pub use error::CliError;
