//! Adversarial training with optional attribution-guided generator updates.

pub mod config;
pub mod run;
pub mod steps;
pub mod trace;

pub use config::{Architecture, TrainConfig, DEFAULT_ALPHA, DEFAULT_BATCH_SIZE, DEFAULT_LR};
pub use run::{no_eval, train, EpochEval, TrainOutcome};
pub use steps::{apply_mask, discriminator_step, generator_step, GenStepStats};
pub use trace::{CsvSink, EpochRecord, NullSink, TraceSink, TrainTrace, CSV_HEADER};
