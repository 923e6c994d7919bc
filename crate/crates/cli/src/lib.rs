//! Command-line front end for `arraymech`: configuration, subcommands and
//! reproducible result bundles.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{execute, Command, RunOptions};
pub use config::RunConfig;
pub use error::CliError;
