//! Command-line front end for `qwalk-core`: configuration, file formats and
//! the experiment commands.

pub mod config;
pub mod error;
pub mod io;
pub mod run;

pub use config::{ExperimentConfig, Overrides};
pub use error::{CliError, CliResult};
pub use run::{run, Command};
