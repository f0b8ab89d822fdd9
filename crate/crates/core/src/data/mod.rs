//! Dataset ingestion and sampling: IDX and CIFAR-10 binary loaders, the
//! in-memory [`Dataset`] contract, noise prior, and a synthetic corpus.

pub mod cifar;
pub mod dataset;
pub mod idx;
pub mod noise;
pub mod synth;

pub use cifar::load_cifar10;
pub use dataset::{bilinear_resize, subsample, Dataset};
pub use idx::load_idx;
pub use noise::sample_noise;
pub use synth::{generate_synth_idx, synth_dataset};
