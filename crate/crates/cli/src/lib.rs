//! Experiment runner for value-conditional state entropy exploration.
//!
//! A JSON [`ExperimentConfig`] describes one condition (task, agent,
//! exploration bonus, budget, seeds). [`run_experiment`] trains every seed
//! and writes a run directory; [`Preset`]s bundle the conditions of the
//! standard comparisons; [`aggregate_dirs`] rebuilds summary tables from
//! finished run directories.

pub mod aggregate;
pub mod config;
pub mod error;
pub mod presets;
pub mod runner;

pub use aggregate::{aggregate_dirs, iqm, std_dev, summarize, summary_csv, ConditionSummary, CurvePoint, Stat};
pub use config::{ExperimentConfig, TaskSpec};
pub use error::{CliError, ErrorReport};
pub use presets::{desk_agent, Preset};
pub use runner::{run_experiment, run_suite, ExperimentOutcome, Manifest, RunOptions, SeedOutcome};
