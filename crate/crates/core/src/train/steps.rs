//! One discriminator update and one generator update, the two halves of a
//! training iteration. The generator update optionally reweights its output
//! gradient with an attribution mask before backpropagating.

use std::time::Instant;

use rand::RngCore;

use crate::augment::AugInstance;
use crate::error::{Error, Result};
use crate::explain::Explainer;
use crate::layers::Phase;
use crate::loss::{bce_mean, bce_mean_targets};
use crate::models::GanPair;
use crate::optim::AdamState;
use crate::tensor::Tensor;

/// delta' = delta + alpha * (delta ∘ mask), elementwise, shapes equal.
/// With alpha = 0 the result is bit-identical to `delta`; signs never flip
/// and magnitudes scale by exactly 1 + alpha * mask when mask is in [0, 1].
pub fn apply_mask(delta: &Tensor<f64>, mask: &Tensor<f64>, alpha: f64) -> Result<Tensor<f64>> {
    if delta.shape() != mask.shape() {
        return Err(Error::shape("attribution mask vs gradient", delta.shape(), mask.shape()));
    }
    Ok(delta.zip_map(mask, |d, m| d + alpha * (d * m))?)
}

fn check_noise(pair: &GanPair<f64>, z: &Tensor<f64>, batch: usize) -> Result<()> {
    if z.rank() != 2 || z.dim(0) != batch || z.dim(1) != pair.noise_dim {
        return Err(Error::shape("noise batch", &[batch, pair.noise_dim], z.shape()));
    }
    Ok(())
}

fn check_images(pair: &GanPair<f64>, x: &Tensor<f64>, context: &str) -> Result<()> {
    let (c, h, w) = pair.image_shape;
    if x.rank() != 4 || x.shape()[1..] != [c, h, w] {
        return Err(Error::shape(context, &[x.dim(0), c, h, w], x.shape()));
    }
    Ok(())
}

/// One optimizer step on the discriminator: reals labelled 1, fresh fakes
/// labelled 0, both halves scored in a single pass. Returns the sum of the
/// two batch-averaged halves (an ideal coin-flip scores 2 ln 2). Generator
/// parameters are read, never written.
pub fn discriminator_step(
    pair: &mut GanPair<f64>,
    real: &Tensor<f64>,
    z: &Tensor<f64>,
    adam_d: &mut AdamState<f64>,
    aug: Option<&AugInstance>,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    let m = real.dim(0);
    check_images(pair, real, "real batch")?;
    check_noise(pair, z, m)?;

    // Frozen: train-path semantics without touching generator batch stats.
    let fake = pair.generator.forward(z, Phase::Frozen, rng)?;
    let (real_in, fake_in) = match aug {
        Some(a) => (a.forward(real)?, a.forward(&fake)?),
        None => (real.clone(), fake),
    };
    let joint = real_in.concat_rows(&fake_in)?;
    let probs = pair.discriminator.forward(&joint, Phase::Train, rng)?;

    let targets = Tensor::from_fn(probs.shape().to_vec(), |i| if i < m { 1.0 } else { 0.0 });
    let loss = bce_mean_targets(&probs, &targets)?;
    // The mean ran over both halves at once; the per-half sum is twice it.
    let d_loss = 2.0 * loss.value;
    pair.discriminator.backward(&loss.grad.scale(2.0))?;
    adam_d.step(&mut pair.discriminator)?;
    Ok(d_loss)
}

pub struct GenStepStats {
    pub g_loss: f64,
    /// Wall-clock spent producing attribution masks this step.
    pub explain_seconds: f64,
}

/// One optimizer step on the generator against the non-saturating target
/// (fakes labelled real). When `use_xai` is set, the gradient arriving at
/// the generator's output is reweighted per example by the explainer's mask
/// before flowing into the generator. Discriminator parameters are read,
/// never written; its gradient buffers are scratch for the next update.
#[allow(clippy::too_many_arguments)]
pub fn generator_step(
    pair: &mut GanPair<f64>,
    z: &Tensor<f64>,
    use_xai: bool,
    alpha: f64,
    explainer: &Explainer,
    adam_g: &mut AdamState<f64>,
    aug: Option<&AugInstance>,
    rng: &mut dyn RngCore,
    explain_rng: &mut dyn RngCore,
) -> Result<GenStepStats> {
    check_noise(pair, z, z.dim(0))?;

    let raw = pair.generator.forward(z, Phase::Train, rng)?;
    check_images(pair, &raw, "generator output")?;

    // Masks are computed on the un-augmented samples the generator actually
    // produced, deterministically (the eval path), before the scoring pass.
    let mut explain_seconds = 0.0;
    let mask = if use_xai {
        let started = Instant::now();
        let mask = explainer.masks_for_batch(&pair.discriminator, &raw, explain_rng)?;
        explain_seconds = started.elapsed().as_secs_f64();
        mask
    } else {
        None
    };

    let scored = match aug {
        Some(a) => a.forward(&raw)?,
        None => raw,
    };
    let probs = pair.discriminator.forward(&scored, Phase::Frozen, rng)?;
    let loss = bce_mean(&probs, 1.0)?;

    let mut delta = pair.discriminator.backward(&loss.grad)?;
    if let Some(a) = aug {
        delta = a.backward(&delta)?;
    }
    let delta = match &mask {
        Some(m) => apply_mask(&delta, m, alpha)?,
        None => delta,
    };
    pair.generator.backward(&delta)?;
    adam_g.step(&mut pair.generator)?;
    Ok(GenStepStats { g_loss: loss.value, explain_seconds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::{
        Dense, Flatten, Layer, LeakyRelu, Reshape, SigmoidLayer, TanhLayer,
    };
    use crate::network::Network;
    use crate::rng::{fill_uniform, rng_from};

    fn tiny_pair(seed: u64) -> GanPair<f64> {
        let mut rng = rng_from(seed);
        let generator = Network::new(
            "tiny_g",
            vec![
                Layer::Dense(Dense::new(3, 4, &mut rng)),
                Layer::Tanh(TanhLayer::new()),
                Layer::Reshape(Reshape::new(vec![1, 2, 2])),
            ],
        );
        let discriminator = Network::new(
            "tiny_d",
            vec![
                Layer::Flatten(Flatten::new()),
                Layer::Dense(Dense::new(4, 5, &mut rng)),
                Layer::LeakyRelu(LeakyRelu::new(0.2)),
                Layer::Dense(Dense::new(5, 1, &mut rng)),
                Layer::Sigmoid(SigmoidLayer::new()),
            ],
        );
        GanPair { generator, discriminator, noise_dim: 3, image_shape: (1, 2, 2) }
    }

    fn snapshot(net: &Network<f64>) -> Vec<Vec<f64>> {
        net.params().iter().map(|(_, p)| p.data().to_vec()).collect()
    }

    fn real_batch(m: usize, seed: u64) -> Tensor<f64> {
        let mut t = Tensor::zeros(vec![m, 1, 2, 2]);
        fill_uniform(t.data_mut(), -1.0, 1.0, &mut rng_from(seed));
        t
    }

    fn noise(m: usize, seed: u64) -> Tensor<f64> {
        let mut t = Tensor::zeros(vec![m, 3]);
        fill_uniform(t.data_mut(), -1.0, 1.0, &mut rng_from(seed));
        t
    }

    #[test]
    fn mask_rule_matches_the_worked_example() {
        let delta = Tensor::new(vec![1, 2], vec![0.2, -0.4]).unwrap();
        let mask = Tensor::new(vec![1, 2], vec![1.0, 0.5]).unwrap();
        let out = apply_mask(&delta, &mask, 0.1).unwrap();
        assert!((out.data()[0] - 0.22).abs() < 1e-15);
        assert!((out.data()[1] - -0.42).abs() < 1e-15);
    }

    #[test]
    fn mask_rule_with_zero_alpha_is_bit_exact_identity() {
        let mut delta = Tensor::zeros(vec![4, 7]);
        fill_uniform(delta.data_mut(), -2.0, 2.0, &mut rng_from(5));
        let mut mask = Tensor::zeros(vec![4, 7]);
        fill_uniform(mask.data_mut(), 0.0, 1.0, &mut rng_from(6));
        let out = apply_mask(&delta, &mask, 0.0).unwrap();
        assert_eq!(out.data(), delta.data());
    }

    #[test]
    fn mask_rule_scales_magnitudes_and_never_flips_signs() {
        let mut delta = Tensor::zeros(vec![3, 16]);
        fill_uniform(delta.data_mut(), -5.0, 5.0, &mut rng_from(7));
        let mut mask = Tensor::zeros(vec![3, 16]);
        fill_uniform(mask.data_mut(), 0.0, 1.0, &mut rng_from(8));
        let alpha = 0.37;
        let out = apply_mask(&delta, &mask, alpha).unwrap();
        for ((&d, &m), &o) in delta.data().iter().zip(mask.data()).zip(out.data()) {
            assert!((o.abs() - d.abs() * (1.0 + alpha * m)).abs() < 1e-12);
            assert!(o.signum() == d.signum() || d == 0.0);
        }
    }

    #[test]
    fn mask_rule_rejects_shape_mismatch() {
        let delta = Tensor::<f64>::zeros(vec![2, 4]);
        let mask = Tensor::<f64>::zeros(vec![2, 5]);
        let err = apply_mask(&delta, &mask, 0.2).unwrap_err();
        assert_eq!(err.kind(), "shape_mismatch");
    }

    #[test]
    fn coin_flip_discriminator_scores_two_ln_two() {
        let mut pair = tiny_pair(1);
        // Zero weights force p = 0.5 on every input.
        pair.discriminator = Network::new(
            "flat_d",
            vec![
                Layer::Flatten(Flatten::new()),
                Layer::Dense(
                    Dense::from_parts(Tensor::zeros(vec![1, 4]), Tensor::zeros(vec![1])).unwrap(),
                ),
                Layer::Sigmoid(SigmoidLayer::new()),
            ],
        );
        let mut adam = AdamState::for_network(&pair.discriminator, 0.0002);
        let d_loss = discriminator_step(
            &mut pair,
            &real_batch(6, 2),
            &noise(6, 3),
            &mut adam,
            None,
            &mut rng_from(4),
        )
        .unwrap();
        assert!((d_loss - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn discriminator_step_trains_d_and_leaves_g_untouched() {
        let mut pair = tiny_pair(2);
        let g_before = snapshot(&pair.generator);
        let d_before = snapshot(&pair.discriminator);
        let mut adam = AdamState::for_network(&pair.discriminator, 0.01);
        let d_loss = discriminator_step(
            &mut pair,
            &real_batch(5, 10),
            &noise(5, 11),
            &mut adam,
            None,
            &mut rng_from(12),
        )
        .unwrap();
        assert!(d_loss.is_finite() && d_loss > 0.0);
        assert_eq!(snapshot(&pair.generator), g_before);
        assert_ne!(snapshot(&pair.discriminator), d_before);
    }

    #[test]
    fn generator_step_trains_g_and_leaves_d_untouched() {
        let mut pair = tiny_pair(3);
        let g_before = snapshot(&pair.generator);
        let d_before = snapshot(&pair.discriminator);
        let mut adam = AdamState::for_network(&pair.generator, 0.01);
        let stats = generator_step(
            &mut pair,
            &noise(5, 20),
            false,
            0.2,
            &Explainer::None,
            &mut adam,
            None,
            &mut rng_from(21),
            &mut rng_from(22),
        )
        .unwrap();
        assert!(stats.g_loss.is_finite() && stats.g_loss > 0.0);
        assert_eq!(stats.explain_seconds, 0.0);
        assert_ne!(snapshot(&pair.generator), g_before);
        assert_eq!(snapshot(&pair.discriminator), d_before);
    }

    #[test]
    fn zero_alpha_guided_step_matches_unguided_step_bit_for_bit() {
        let mut plain = tiny_pair(4);
        let mut guided = plain.clone();
        let mut adam_a = AdamState::for_network(&plain.generator, 0.01);
        let mut adam_b = AdamState::for_network(&guided.generator, 0.01);
        let z = noise(4, 30);

        let a = generator_step(
            &mut plain,
            &z,
            false,
            0.0,
            &Explainer::None,
            &mut adam_a,
            None,
            &mut rng_from(31),
            &mut rng_from(32),
        )
        .unwrap();
        let b = generator_step(
            &mut guided,
            &z,
            true,
            0.0,
            &Explainer::Saliency,
            &mut adam_b,
            None,
            &mut rng_from(31),
            &mut rng_from(32),
        )
        .unwrap();

        assert_eq!(a.g_loss.to_bits(), b.g_loss.to_bits());
        assert_eq!(snapshot(&plain.generator), snapshot(&guided.generator));
        assert!(b.explain_seconds > 0.0);
    }

    #[test]
    fn guided_step_with_positive_alpha_diverges_from_unguided() {
        let mut plain = tiny_pair(5);
        let mut guided = plain.clone();
        let mut adam_a = AdamState::for_network(&plain.generator, 0.01);
        let mut adam_b = AdamState::for_network(&guided.generator, 0.01);
        let z = noise(4, 40);

        generator_step(
            &mut plain,
            &z,
            false,
            0.2,
            &Explainer::None,
            &mut adam_a,
            None,
            &mut rng_from(41),
            &mut rng_from(42),
        )
        .unwrap();
        generator_step(
            &mut guided,
            &z,
            true,
            0.2,
            &Explainer::Saliency,
            &mut adam_b,
            None,
            &mut rng_from(41),
            &mut rng_from(42),
        )
        .unwrap();

        assert_ne!(snapshot(&plain.generator), snapshot(&guided.generator));
    }

    #[test]
    fn steps_reject_mismatched_batch_shapes() {
        let mut pair = tiny_pair(6);
        let mut adam = AdamState::for_network(&pair.discriminator, 0.01);
        // Wrong image shape.
        let bad_real = Tensor::<f64>::zeros(vec![4, 1, 3, 3]);
        assert!(discriminator_step(
            &mut pair,
            &bad_real,
            &noise(4, 1),
            &mut adam,
            None,
            &mut rng_from(1),
        )
        .is_err());
        // Noise count disagrees with the real batch.
        assert!(discriminator_step(
            &mut pair,
            &real_batch(4, 2),
            &noise(3, 3),
            &mut adam,
            None,
            &mut rng_from(1),
        )
        .is_err());
    }
}
