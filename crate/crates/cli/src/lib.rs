//! Experiment harness: config parsing, seeded parallel runs and the
//! CSV/JSON artifacts they leave behind.

pub mod config;
pub mod error;
pub mod experiment;
pub mod lemma4;

pub use config::{config_hash, parse_config, parse_config_with_base, ExperimentConfig, GameSource};
pub use error::{CliError, Result};
pub use experiment::{run_experiment, ExperimentReport, Summary, CSV_HEADER};
