//! Experiment configuration, the parallel evaluation executor with
//! checkpoint caching, trial logging, and run comparison.
//!
//! A run directory contains:
//!
//! - `trials.jsonl`: one [`TrialRecord`] per training, in trial-id order;
//! - `summary.json`: the [`RunSummary`] (no timings, so it is reproducible
//!   byte for byte);
//! - `best_config.json`: the winning configuration;
//! - `cache/`: cached outcomes and checkpoints, unless disabled.

mod cache;
mod config;
mod executor;
mod log;
mod report;
mod tune;

pub use cache::{CacheKey, CachedOutcome, CheckpointCache};
pub use config::{
    BenchmarkSettings, CacheSettings, CheckpointPolicy, CvSettings, ExperimentConfig, MultiFidelitySettings,
    OptimizerChoice, SmoteSettings,
};
pub use executor::{parallel_evaluate, Executor};
pub use log::{read_trials, Phase, TrialLog, TrialRecord};
pub use report::{report_compare, ComparisonReport, RunColumn, TestOutcome, COLUMN_TITLES};
pub use tune::{run_tune, FinalResult, RunSummary};
