//! Command line driver for `fdcrack-core`: configuration files, experiment
//! sweeps, CSV output and triangle surface files.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod surface_io;

pub use commands::{run, Command};
pub use config::Config;
pub use error::{CliError, CliResult};
