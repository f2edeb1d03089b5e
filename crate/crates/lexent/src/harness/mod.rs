//! Evaluation, run-file IO, configuration and the command-line interface.

pub mod cli;
pub mod config;
pub mod metrics;
pub mod runfile;

pub use config::{load_config, Config, ConfigError};
pub use metrics::{accuracy, f_beta, macro_pr, MetricsError, MetricsReport};
pub use runfile::{RunFile, RunFileError, RunRecord};
