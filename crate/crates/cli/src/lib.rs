//! Command-line front end for the R-MAC+ / db-regions pipeline.

pub mod commands;
pub mod config;
pub mod error;

pub use config::{GtFormat, RunConfig, WhiteningSource};
pub use error::{CliError, CliResult};
