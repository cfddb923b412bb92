//! Experiment runner for the `ocpa-core` diagnostics: TOML configuration,
//! a rayon worker pool, and CSV/JSON/binary artifacts.

// Negated float comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod exec;
pub mod experiments;
pub mod io;
pub mod presets;
pub mod runner;

pub use config::{ConfigError, ExperimentConfig, ExperimentKind, LoadedConfig};
pub use experiments::{Check, Outcome, RunError};
pub use runner::{payload, run, RunOptions, RunReport, TableFormat};
