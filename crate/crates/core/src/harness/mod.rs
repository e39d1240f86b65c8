//! Experiment harness behind the `rsma` binary.

pub mod config;
pub mod experiment;
pub mod output;

pub use config::{ExperimentConfig, Grouping, Scheme};
pub use experiment::{ergodic_sweep, large_scale_sweep, mode_search, rate_region, run_trial, Evaluation, ModeOutcome, RegionRow, SweepRow, Trial};
