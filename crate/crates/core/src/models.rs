//! Reference architectures: the fully-connected and convolutional GAN
//! pairs used throughout, and the small LeNet-style classifier whose
//! penultimate layer feeds the Fréchet distance.
//!
//! Builders take explicit rng streams so generator and discriminator can
//! be seeded independently of each other and of everything else.

use rand::RngCore;

use crate::error::Result;
use crate::layers::{
    AvgPool2d, BatchNorm, Conv2d, ConvTranspose2d, Dense, Dropout, Flatten, Layer, LeakyRelu,
    Reshape, SigmoidLayer, TanhLayer,
};
use crate::network::Network;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const NOISE_DIM: usize = 100;
pub const LEAKY_SLOPE: f64 = 0.2;
pub const DISC_DROPOUT: f64 = 0.3;

/// A generator/discriminator pair plus the shapes tying them together.
#[derive(Debug, Clone)]
pub struct GanPair<T = f64> {
    pub generator: Network<T>,
    pub discriminator: Network<T>,
    pub noise_dim: usize,
    pub image_shape: (usize, usize, usize),
}

impl<T: Scalar> GanPair<T> {
    pub fn image_len(&self) -> usize {
        let (c, h, w) = self.image_shape;
        c * h * w
    }
}

/// Fully-connected pair on (1, 32, 32) images.
///
/// Generator widths 100, 256, 512, 1296, 1024 with leaky-relu hidden
/// activations and a tanh head reshaped to the image; discriminator
/// mirrors them back down to a single sigmoid unit with dropout 0.3 after
/// every hidden activation.
pub fn build_fc_gan<T: Scalar>(g_rng: &mut dyn RngCore, d_rng: &mut dyn RngCore) -> GanPair<T> {
    let leaky = || Layer::LeakyRelu(LeakyRelu::new(LEAKY_SLOPE));
    let generator = Network::new(
        "fc_generator",
        vec![
            Layer::Dense(Dense::new(100, 256, g_rng)),
            leaky(),
            Layer::Dense(Dense::new(256, 512, g_rng)),
            leaky(),
            Layer::Dense(Dense::new(512, 1296, g_rng)),
            leaky(),
            Layer::Dense(Dense::new(1296, 1024, g_rng)),
            Layer::Tanh(TanhLayer::new()),
            Layer::Reshape(Reshape::new(vec![1, 32, 32])),
        ],
    );
    let discriminator = Network::new(
        "fc_discriminator",
        vec![
            Layer::Flatten(Flatten::new()),
            Layer::Dense(Dense::new(1024, 1296, d_rng)),
            leaky(),
            Layer::Dropout(Dropout::new(DISC_DROPOUT).expect("rate in range")),
            Layer::Dense(Dense::new(1296, 512, d_rng)),
            leaky(),
            Layer::Dropout(Dropout::new(DISC_DROPOUT).expect("rate in range")),
            Layer::Dense(Dense::new(512, 256, d_rng)),
            leaky(),
            Layer::Dropout(Dropout::new(DISC_DROPOUT).expect("rate in range")),
            Layer::Dense(Dense::new(256, 1, d_rng)),
            Layer::Sigmoid(SigmoidLayer::new()),
        ],
    );
    GanPair { generator, discriminator, noise_dim: NOISE_DIM, image_shape: (1, 32, 32) }
}

/// Convolutional pair on (channels, 32, 32) images.
///
/// Generator spatial ladder 1→4→8→16→32 over channels 256→128→64→out;
/// discriminator mirrors it, 32→16→8→4→1 over 64→128→256→1. Batchnorm
/// follows every conv except the final one on each side.
pub fn build_dc_gan<T: Scalar>(
    channels: usize,
    g_rng: &mut dyn RngCore,
    d_rng: &mut dyn RngCore,
) -> GanPair<T> {
    let leaky = || Layer::LeakyRelu(LeakyRelu::new(LEAKY_SLOPE));
    let generator = Network::new(
        "dc_generator",
        vec![
            Layer::Reshape(Reshape::new(vec![NOISE_DIM, 1, 1])),
            Layer::ConvTranspose2d(ConvTranspose2d::new(NOISE_DIM, 256, 4, 1, 0, g_rng)),
            Layer::BatchNorm(BatchNorm::new(256, g_rng)),
            leaky(),
            Layer::ConvTranspose2d(ConvTranspose2d::new(256, 128, 4, 2, 1, g_rng)),
            Layer::BatchNorm(BatchNorm::new(128, g_rng)),
            leaky(),
            Layer::ConvTranspose2d(ConvTranspose2d::new(128, 64, 4, 2, 1, g_rng)),
            Layer::BatchNorm(BatchNorm::new(64, g_rng)),
            leaky(),
            Layer::ConvTranspose2d(ConvTranspose2d::new(64, channels, 4, 2, 1, g_rng)),
            Layer::Tanh(TanhLayer::new()),
        ],
    );
    let discriminator = Network::new(
        "dc_discriminator",
        vec![
            Layer::Conv2d(Conv2d::new(channels, 64, 4, 2, 1, d_rng)),
            Layer::BatchNorm(BatchNorm::new(64, d_rng)),
            leaky(),
            Layer::Conv2d(Conv2d::new(64, 128, 4, 2, 1, d_rng)),
            Layer::BatchNorm(BatchNorm::new(128, d_rng)),
            leaky(),
            Layer::Conv2d(Conv2d::new(128, 256, 4, 2, 1, d_rng)),
            Layer::BatchNorm(BatchNorm::new(256, d_rng)),
            leaky(),
            Layer::Conv2d(Conv2d::new(256, 1, 4, 1, 0, d_rng)),
            Layer::Sigmoid(SigmoidLayer::new()),
            Layer::Flatten(Flatten::new()),
        ],
    );
    GanPair { generator, discriminator, noise_dim: NOISE_DIM, image_shape: (channels, 32, 32) }
}

/// LeNet-style classifier on 32x32 images. The 84-unit activation two
/// layers before the logits is the feature representation used for
/// distribution distances.
#[derive(Debug, Clone)]
pub struct LeNetClassifier<T = f64> {
    pub network: Network<T>,
    pub num_classes: usize,
    pub channels: usize,
    /// Prefix length whose output is the 84-d feature vector.
    feature_layers: usize,
}

pub const LENET_FEATURE_DIM: usize = 84;

pub fn build_lenet_classifier<T: Scalar>(
    channels: usize,
    num_classes: usize,
    rng: &mut dyn RngCore,
) -> LeNetClassifier<T> {
    assert!(num_classes >= 2, "classifier needs at least two classes");
    let network = Network::new(
        "lenet",
        vec![
            Layer::Conv2d(Conv2d::new(channels, 6, 5, 1, 0, rng)),
            Layer::Tanh(TanhLayer::new()),
            Layer::AvgPool2d(AvgPool2d::new(2)),
            Layer::Conv2d(Conv2d::new(6, 16, 5, 1, 0, rng)),
            Layer::Tanh(TanhLayer::new()),
            Layer::AvgPool2d(AvgPool2d::new(2)),
            Layer::Flatten(Flatten::new()),
            Layer::Dense(Dense::new(400, 120, rng)),
            Layer::Tanh(TanhLayer::new()),
            Layer::Dense(Dense::new(120, LENET_FEATURE_DIM, rng)),
            Layer::Tanh(TanhLayer::new()),
            Layer::Dense(Dense::new(LENET_FEATURE_DIM, num_classes, rng)),
        ],
    );
    LeNetClassifier { network, num_classes, channels, feature_layers: 11 }
}

impl<T: Scalar> LeNetClassifier<T> {
    /// 84-d feature vectors, shape (n, 84).
    pub fn features(&self, images: &Tensor<T>) -> Result<Tensor<T>> {
        self.network.forward_eval_prefix(images, self.feature_layers)
    }

    /// Raw class scores, shape (n, num_classes).
    pub fn logits(&self, images: &Tensor<T>) -> Result<Tensor<T>> {
        self.network.forward_eval(images)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::Phase;
    use crate::rng::rng_from;

    fn dense_dims(net: &Network<f64>) -> Vec<(usize, usize)> {
        net.layers()
            .iter()
            .filter_map(|l| match l {
                Layer::Dense(d) => Some((d.in_dim(), d.out_dim())),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn fc_pair_matches_declared_widths_and_counts() {
        let mut gr = rng_from(1);
        let mut dr = rng_from(2);
        let pair = build_fc_gan::<f64>(&mut gr, &mut dr);
        assert_eq!(dense_dims(&pair.generator), [(100, 256), (256, 512), (512, 1296), (1296, 1024)]);
        assert_eq!(dense_dims(&pair.discriminator), [(1024, 1296), (1296, 512), (512, 256), (256, 1)]);
        // Closed-form sums over the widths above, weights plus biases.
        assert_eq!(pair.generator.param_count(), 2_150_416);
        assert_eq!(pair.discriminator.param_count(), 2_124_049);
    }

    #[test]
    fn fc_round_trip_shapes_and_ranges() {
        let mut gr = rng_from(1);
        let mut dr = rng_from(2);
        let mut pair = build_fc_gan::<f64>(&mut gr, &mut dr);
        let z = Tensor::from_fn(vec![3, 100], |i| ((i % 19) as f64 - 9.0) / 9.0);
        let mut step_rng = rng_from(3);
        let img = pair.generator.forward(&z, Phase::Train, &mut step_rng).unwrap();
        assert_eq!(img.shape(), &[3, 1, 32, 32]);
        assert!(img.data().iter().all(|v| (-1.0..=1.0).contains(v)));
        let p = pair.discriminator.forward(&img, Phase::Train, &mut step_rng).unwrap();
        assert_eq!(p.shape(), &[3, 1]);
        assert!(p.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn dc_generator_walks_the_spatial_ladder() {
        let mut gr = rng_from(1);
        let mut dr = rng_from(2);
        let pair = build_dc_gan::<f64>(3, &mut gr, &mut dr);
        let z = Tensor::from_fn(vec![2, 100], |i| ((i % 7) as f64 - 3.0) / 3.0);
        let trace = pair.generator.trace_eval(&z).unwrap();
        let spatial: Vec<usize> = trace
            .values
            .iter()
            .filter(|t| t.rank() == 4)
            .map(|t| t.shape()[2])
            .collect();
        assert!(spatial.starts_with(&[1, 4]), "ladder starts {spatial:?}");
        assert!(spatial.ends_with(&[32, 32]), "ladder ends {spatial:?}");
        for want in [1usize, 4, 8, 16, 32] {
            assert!(spatial.contains(&want), "missing stage {want} in {spatial:?}");
        }
        assert_eq!(trace.output().shape(), &[2, 3, 32, 32]);
        assert!(trace.output().data().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn dc_discriminator_downsamples_to_one_probability() {
        let mut gr = rng_from(1);
        let mut dr = rng_from(2);
        let pair = build_dc_gan::<f64>(3, &mut gr, &mut dr);
        let img = Tensor::from_fn(vec![2, 3, 32, 32], |i| ((i % 11) as f64 - 5.0) / 5.0);
        let trace = pair.discriminator.trace_eval(&img).unwrap();
        let spatial: Vec<usize> = trace
            .values
            .iter()
            .filter(|t| t.rank() == 4)
            .map(|t| t.shape()[2])
            .collect();
        for want in [32usize, 16, 8, 4, 1] {
            assert!(spatial.contains(&want), "missing stage {want} in {spatial:?}");
        }
        let p = trace.output();
        assert_eq!(p.shape(), &[2, 1]);
        assert!(p.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn batchnorm_follows_every_conv_except_the_last() {
        let mut gr = rng_from(1);
        let mut dr = rng_from(2);
        let pair = build_dc_gan::<f64>(3, &mut gr, &mut dr);
        for net in [&pair.generator, &pair.discriminator] {
            let conv_positions: Vec<usize> = net
                .layers()
                .iter()
                .enumerate()
                .filter(|(_, l)| matches!(l, Layer::Conv2d(_) | Layer::ConvTranspose2d(_)))
                .map(|(i, _)| i)
                .collect();
            let (last, body) = conv_positions.split_last().unwrap();
            for &i in body {
                assert!(
                    matches!(net.layers()[i + 1], Layer::BatchNorm(_)),
                    "{} layer {} lacks batchnorm",
                    net.name,
                    i
                );
            }
            assert!(!matches!(net.layers()[last + 1], Layer::BatchNorm(_)));
        }
    }

    #[test]
    fn dropout_lives_only_in_the_fc_discriminator() {
        let mut r1 = rng_from(1);
        let mut r2 = rng_from(2);
        let fc = build_fc_gan::<f64>(&mut r1, &mut r2);
        let dc = build_dc_gan::<f64>(3, &mut r1, &mut r2);
        let count = |net: &Network<f64>| {
            net.layers().iter().filter(|l| matches!(l, Layer::Dropout(_))).count()
        };
        assert_eq!(count(&fc.generator), 0);
        assert_eq!(count(&fc.discriminator), 3);
        assert_eq!(count(&dc.generator), 0);
        assert_eq!(count(&dc.discriminator), 0);
    }

    #[test]
    fn lenet_features_are_84_wide_for_any_channel_count() {
        for channels in [1usize, 3] {
            let mut r = rng_from(4);
            let clf = build_lenet_classifier::<f64>(channels, 10, &mut r);
            let x = Tensor::from_fn(vec![2, channels, 32, 32], |i| ((i % 13) as f64 - 6.0) / 6.0);
            let f = clf.features(&x).unwrap();
            assert_eq!(f.shape(), &[2, 84]);
            let logits = clf.logits(&x).unwrap();
            assert_eq!(logits.shape(), &[2, 10]);
        }
    }

    #[test]
    fn lenet_feature_prefix_feeds_the_logit_head() {
        let mut r = rng_from(4);
        let clf = build_lenet_classifier::<f64>(1, 10, &mut r);
        let x = Tensor::from_fn(vec![1, 1, 32, 32], |i| ((i % 9) as f64 - 4.0) / 4.0);
        let f = clf.features(&x).unwrap();
        // Running the remaining dense layer by hand reproduces the logits.
        let head = clf.network.layers().last().unwrap();
        let manual = head.forward_eval(&f).unwrap();
        let direct = clf.logits(&x).unwrap();
        assert_eq!(manual.data(), direct.data());
    }
}
