//! Experiment orchestration on top of the core library: resolved run
//! specifications, the run driver with its artifact layout, and the
//! cross-run comparison table.

pub mod experiment;

pub use experiment::{
    compare, load_dataset, parse_config, run, DatasetSpec, ExperimentSpec, Overrides, RunSummary,
};
