//! Experiment wiring: configuration, the per-run driver, and multi-run
//! orchestration with reports and comparisons.

pub mod config;
pub mod driver;
pub mod experiment;

pub use config::{ExperimentConfig, Method, Precision, RunConfig, WorkloadConfig, WorkloadKind};
pub use driver::{run_one, LearnedState, RunOutput, WarmStart};
pub use experiment::{
    compare, export_qtable, format_comparison, load_warm_start, run_all, run_dir, run_experiment,
    save_warm_start, Comparison, ComparisonRow, ExperimentSummary,
};
