//! Configuration, CLI commands, experiment orchestration, persistence and
//! deterministic replay.

pub mod commands;
pub mod config;
pub mod manifest;

pub use commands::{cmd_constants, cmd_couple, cmd_replay, cmd_simulate, cmd_verify, HarnessError};
pub use config::{load_config, load_config_text, ConfigError, ExperimentConfig};
pub use manifest::RunManifest;
