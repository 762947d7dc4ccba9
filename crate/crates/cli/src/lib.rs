//! Experiment runner: JSON configs in, `summary.csv`, per-seed reports and
//! checkpoints out.

// `!(x > 0.0)` is how parameter checks reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod evaluate;
pub mod experiment;

pub use config::{load_config, parse_config, EvalCounts, ExperimentConfig, Metric};
pub use error::CliError;
pub use experiment::{run_experiment, run_seed, SeedOutcome, SUMMARY_HEADER};
