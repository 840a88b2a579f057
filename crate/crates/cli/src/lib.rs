//! Command line front end for the `mcorr-core` estimators.

pub mod args;
pub mod commands;
pub mod error;
pub mod ingest;
pub mod report;

pub use args::Cli;
pub use commands::run;
pub use error::CliError;
