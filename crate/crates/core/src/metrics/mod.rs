//! Evaluation: Fréchet distance over a learned feature space and
//! wall-clock accounting.

pub mod features;
pub mod fid;
pub mod stopwatch;

pub use features::{
    classification_accuracy, extract_features, train_feature_classifier, FeatureClassifier,
    ACCURACY_FLOOR,
};
pub use fid::{fid_from_features, frechet_distance, gaussian_stats, FidRecord, GaussianStats};
pub use stopwatch::Stopwatch;
