//! Feature extraction and the small classifier whose penultimate layer
//! defines the FID feature space.

use rand::seq::SliceRandom;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::layers::Phase;
use crate::loss::softmax_cross_entropy;
use crate::models::{build_lenet_classifier, LeNetClassifier};
use crate::optim::AdamState;
use crate::rng::{rng_for, tags};
use crate::tensor::Tensor;

pub const CLASSIFIER_LR: f64 = 1e-3;
pub const CLASSIFIER_BATCH: usize = 64;
/// Held-out accuracy below this marks the feature space as suspect.
pub const ACCURACY_FLOOR: f64 = 0.90;
const EXTRACT_BATCH: usize = 256;
const HOLDOUT_DENOM: usize = 5;

/// Penultimate-layer activations for a stack of images, (n, 84). Runs in
/// eval mode, so repeated calls are identical.
pub fn extract_features(
    classifier: &LeNetClassifier<f64>,
    images: &Tensor<f64>,
) -> Result<Tensor<f64>> {
    let n = images.dim(0);
    let row = images.row_len();
    let mut chunks = Vec::new();
    let mut start = 0;
    while start < n {
        let end = (start + EXTRACT_BATCH).min(n);
        let mut shape = images.shape().to_vec();
        shape[0] = end - start;
        let batch = Tensor::new(shape, images.data()[start * row..end * row].to_vec())?;
        chunks.push(classifier.features(&batch)?);
        start = end;
    }
    if chunks.len() == 1 {
        return Ok(chunks.pop().expect("one chunk"));
    }
    let dim = chunks[0].dim(1);
    let mut data = Vec::with_capacity(n * dim);
    for c in &chunks {
        data.extend_from_slice(c.data());
    }
    Tensor::new(vec![n, dim], data)
}

/// A trained feature extractor plus the health of its feature space.
#[derive(Debug)]
pub struct FeatureClassifier {
    pub model: LeNetClassifier<f64>,
    pub holdout_accuracy: f64,
    /// Set when held-out accuracy is under [`ACCURACY_FLOOR`]; FID over
    /// this feature space may not mean much.
    pub low_accuracy_warning: bool,
}

/// Fraction of correctly argmax-classified examples.
pub fn classification_accuracy(
    model: &LeNetClassifier<f64>,
    images: &Tensor<f64>,
    labels: &[u8],
) -> Result<f64> {
    if images.dim(0) != labels.len() {
        return Err(Error::CountMismatch {
            images: images.dim(0),
            labels: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::Config("accuracy over zero examples".into()));
    }
    let logits = model.logits(images)?;
    let k = logits.dim(1);
    let mut hits = 0usize;
    for (i, &label) in labels.iter().enumerate() {
        let row = &logits.data()[i * k..(i + 1) * k];
        let mut best = 0usize;
        for j in 1..k {
            if row[j] > row[best] {
                best = j;
            }
        }
        if best == label as usize {
            hits += 1;
        }
    }
    Ok(hits as f64 / labels.len() as f64)
}

/// Trains the classifier on an 80/20 split of the labeled dataset with
/// cross-entropy and Adam. Fully deterministic in (dataset, epochs, seed).
pub fn train_feature_classifier(
    data: &Dataset,
    epochs: usize,
    seed: u64,
) -> Result<FeatureClassifier> {
    let labels = data
        .labels
        .as_ref()
        .ok_or_else(|| Error::Config("feature classifier needs a labeled dataset".into()))?;
    if data.len() < HOLDOUT_DENOM {
        return Err(Error::Config(format!(
            "feature classifier needs at least {HOLDOUT_DENOM} examples, got {}",
            data.len()
        )));
    }
    if epochs == 0 {
        return Err(Error::Config("classifier epochs must be positive".into()));
    }
    let num_classes = (labels.iter().copied().max().unwrap_or(0) as usize + 1).max(2);

    let mut rng = rng_for(seed, tags::CLASSIFIER);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let holdout_len = (data.len() / HOLDOUT_DENOM).max(1);
    let (holdout_idx, train_idx) = order.split_at(holdout_len);

    let mut model = build_lenet_classifier::<f64>(data.channels(), num_classes, &mut rng);
    let mut adam = AdamState::for_network(&model.network, CLASSIFIER_LR);

    let mut train_order = train_idx.to_vec();
    for _epoch in 0..epochs {
        train_order.shuffle(&mut rng);
        for chunk in train_order.chunks(CLASSIFIER_BATCH) {
            let x = data.select(chunk)?;
            let y: Vec<u8> = chunk.iter().map(|&i| labels[i]).collect();
            let logits = model.network.forward(&x, Phase::Train, &mut rng)?;
            let loss = softmax_cross_entropy(&logits, &y)?;
            model.network.backward(&loss.grad)?;
            adam.step(&mut model.network)?;
        }
    }

    let holdout_x = data.select(holdout_idx)?;
    let holdout_y: Vec<u8> = holdout_idx.iter().map(|&i| labels[i]).collect();
    let holdout_accuracy = classification_accuracy(&model, &holdout_x, &holdout_y)?;
    Ok(FeatureClassifier {
        model,
        holdout_accuracy,
        low_accuracy_warning: holdout_accuracy < ACCURACY_FLOOR,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_dataset;
    use crate::loss::softmax;
    use crate::models::LENET_FEATURE_DIM;
    use crate::rng::rng_from;

    #[test]
    fn features_have_expected_shape_and_are_deterministic() {
        let mut r = rng_from(4);
        let model = build_lenet_classifier::<f64>(1, 10, &mut r);
        let data = synth_dataset(6, 0).unwrap();
        let a = extract_features(&model, &data.images).unwrap();
        let b = extract_features(&model, &data.images).unwrap();
        assert_eq!(a.shape(), &[6, LENET_FEATURE_DIM]);
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn duplicated_image_yields_duplicated_feature_row() {
        let mut r = rng_from(4);
        let model = build_lenet_classifier::<f64>(1, 10, &mut r);
        let data = synth_dataset(3, 0).unwrap();
        let twice = data.select(&[1, 1]).unwrap();
        let f = extract_features(&model, &twice).unwrap();
        let d = LENET_FEATURE_DIM;
        assert_eq!(&f.data()[..d], &f.data()[d..]);
    }

    #[test]
    fn features_are_equivariant_under_batch_permutation() {
        let mut r = rng_from(9);
        let model = build_lenet_classifier::<f64>(1, 10, &mut r);
        let data = synth_dataset(4, 2).unwrap();
        let fwd = extract_features(&model, &data.select(&[0, 1, 2, 3]).unwrap()).unwrap();
        let rev = extract_features(&model, &data.select(&[3, 2, 1, 0]).unwrap()).unwrap();
        let d = LENET_FEATURE_DIM;
        for i in 0..4 {
            assert_eq!(&fwd.data()[i * d..(i + 1) * d], &rev.data()[(3 - i) * d..(4 - i) * d]);
        }
    }

    #[test]
    fn training_is_seed_deterministic() {
        let data = synth_dataset(60, 7).unwrap();
        let a = train_feature_classifier(&data, 1, 42).unwrap();
        let b = train_feature_classifier(&data, 1, 42).unwrap();
        assert_eq!(a.holdout_accuracy, b.holdout_accuracy);
        for ((_, pa), (_, pb)) in a.model.network.params().iter().zip(b.model.network.params()) {
            assert_eq!(pa.data(), pb.data());
        }
    }

    #[test]
    fn learns_the_synthetic_digits() {
        let data = synth_dataset(500, 11).unwrap();
        let trained = train_feature_classifier(&data, 10, 5).unwrap();
        assert!(
            trained.holdout_accuracy > 0.9,
            "held-out accuracy {}",
            trained.holdout_accuracy
        );
        assert!(!trained.low_accuracy_warning);
    }

    #[test]
    fn softmax_rows_of_trained_logits_normalize() {
        let data = synth_dataset(40, 3).unwrap();
        let trained = train_feature_classifier(&data, 1, 2).unwrap();
        let logits = trained.model.logits(&data.images).unwrap();
        let probs = softmax(&logits).unwrap();
        for i in 0..data.len() {
            let s: f64 = probs.data()[i * 10..(i + 1) * 10].iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn unlabeled_data_is_rejected() {
        let mut data = synth_dataset(20, 0).unwrap();
        data.labels = None;
        assert!(train_feature_classifier(&data, 1, 0).is_err());
    }
}
