//! Command-line front end for `spinquench`: quench runs, fits, sweeps and
//! finite-size comparisons driven by a TOML config.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{Backend, ExperimentConfig, Format};
pub use error::CliError;
