//! Experiment driver for the `fadegame-core` solvers: TOML configuration,
//! per-subcommand runs over an SNR grid, and CSV output with provenance
//! headers.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

pub use config::{load_config, ExperimentConfig, Preset};
pub use error::{Error, Result};
