//! Explanation-guided GAN training laboratory.
//!
//! A self-contained stack for studying attribution-modulated generator
//! updates at desk scale: a small tensor core with hand-derived backward
//! passes, fully-connected and convolutional GAN pairs, three per-example
//! explainers (gradient saliency, LIME over pixel patches, DeepLIFT
//! rescale), Fréchet distance over learned classifier features, and a
//! reproducible experiment runner.
//!
//! The numeric core is generic over [`scalar::Scalar`] (f32/f64); the
//! operational lane is f64, for which aliases are exported at the root.

pub mod error;
pub mod scalar;

pub mod rng;
pub mod tensor;

pub mod augment;
pub mod data;
pub mod linalg;
pub mod loss;

pub mod layers;
pub mod metrics;
pub mod models;
pub mod network;

pub mod explain;
pub mod checkpoint;
pub mod gradcheck;
pub mod image;
pub mod optim;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Operational-precision aliases. Generic types default to f64 as well;
/// these names exist so call sites can be explicit about the lane.
pub type Tensor64 = tensor::Tensor<f64>;
pub type Tensor32 = tensor::Tensor<f32>;
