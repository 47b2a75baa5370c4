//! Experiment runner for the channels' matching algorithm: named presets,
//! configuration-driven runs, random-trial statistics and trace export.

pub mod config;
pub mod error;
pub mod export;
pub mod presets;
pub mod report;
pub mod runner;
pub mod trials;

pub use config::{ExperimentConfig, Format, Kind};
pub use error::CliError;
pub use presets::{preset_config, run_preset, PRESETS};
pub use report::{Check, Report};
pub use runner::{run, RunOutput};
pub use trials::{run_trials, TrialScenario, TrialSettings, TrialsSummary};
