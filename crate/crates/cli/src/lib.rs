//! Command-line front end: configuration, experiment runner and CSV output.

pub mod config;
pub mod error;
pub mod runner;

pub use config::{load_config, Antenna, ExperimentSpec, FasChannel, Mode, SweepVariable};
pub use error::CliError;
pub use runner::run;
