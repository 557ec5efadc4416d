//! Experiment driver: configs, slope fits, CSV output and the studies behind the CLI.

pub mod config;
pub mod experiments;
pub mod fit;
pub mod output;
