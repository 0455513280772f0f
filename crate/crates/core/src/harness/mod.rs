//! Data generation and I/O, train/validation/test splits, experiment
//! configuration and the repeat protocol.

mod config;
mod dataset;
mod experiment;
mod split;
mod synthetic;

pub use config::{AnalysisConfig, DataSource, ExperimentConfig, GridPoint, Sweep, SweepParam};
pub use dataset::{format_dataset, load_dataset, load_dataset_blind, parse_dataset, save_dataset, Dataset, Sample};
pub use experiment::{
    format_summary, run_config, run_experiment, run_single, ExperimentSummary, PointSummary, RepeatOutcome, RepeatResult,
};
pub use split::{split, SplitSpec};
pub use synthetic::{generate_synthetic, QualityRule, SyntheticData, SyntheticSpec};
