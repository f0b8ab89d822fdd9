//! Batch normalization over the channel dimension of (n, c, h, w) or
//! (n, c) inputs. Normalization uses the biased batch variance; running
//! variance is tracked unbiased. Running statistics are only written in
//! `Phase::Train` so a frozen network stays bit-identical.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::rng::fill_normal;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone)]
struct BnCache<T> {
    xhat: Tensor<T>,
    inv_std: Vec<T>,
    batch_stats: bool,
}

#[derive(Debug, Clone)]
pub struct BatchNorm<T = f64> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub(crate) grad_gamma: Option<Tensor<T>>,
    pub(crate) grad_beta: Option<Tensor<T>>,
    cache: Option<BnCache<T>>,
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(channels: usize, rng: &mut dyn RngCore) -> Self {
        let mut gamma = Tensor::zeros(vec![channels]);
        fill_normal(gamma.data_mut(), 1.0, 0.02, rng);
        BatchNorm {
            gamma,
            beta: Tensor::zeros(vec![channels]),
            running_mean: Tensor::zeros(vec![channels]),
            running_var: Tensor::filled(vec![channels], T::one()),
            grad_gamma: None,
            grad_beta: None,
            cache: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.dim(0)
    }

    fn geometry(&self, x: &Tensor<T>) -> Result<(usize, usize, usize)> {
        let c = self.channels();
        match x.rank() {
            2 if x.dim(1) == c => Ok((x.dim(0), c, 1)),
            4 if x.dim(1) == c => Ok((x.dim(0), c, x.dim(2) * x.dim(3))),
            _ => Err(Error::shape("batchnorm input", &[0, c], x.shape())),
        }
    }

    fn batch_moments(&self, x: &Tensor<T>, n: usize, c: usize, s: usize) -> (Vec<T>, Vec<T>) {
        let m = T::cast((n * s) as f64);
        let mut mean = vec![T::zero(); c];
        let mut var = vec![T::zero(); c];
        for b in 0..n {
            for ch in 0..c {
                let base = (b * c + ch) * s;
                for i in 0..s {
                    mean[ch] += x.data()[base + i];
                }
            }
        }
        for v in mean.iter_mut() {
            *v /= m;
        }
        for b in 0..n {
            for ch in 0..c {
                let base = (b * c + ch) * s;
                for i in 0..s {
                    let d = x.data()[base + i] - mean[ch];
                    var[ch] += d * d;
                }
            }
        }
        for v in var.iter_mut() {
            *v /= m;
        }
        (mean, var)
    }

    fn normalize(
        &self,
        x: &Tensor<T>,
        mean: &[T],
        var: &[T],
        n: usize,
        c: usize,
        s: usize,
    ) -> (Tensor<T>, Tensor<T>, Vec<T>) {
        let eps = T::cast(BN_EPS);
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let mut xhat = Tensor::zeros(x.shape().to_vec());
        let mut out = Tensor::zeros(x.shape().to_vec());
        for b in 0..n {
            for ch in 0..c {
                let base = (b * c + ch) * s;
                let (g, bt, mu, is) =
                    (self.gamma.data()[ch], self.beta.data()[ch], mean[ch], inv_std[ch]);
                for i in 0..s {
                    let h = (x.data()[base + i] - mu) * is;
                    xhat.data_mut()[base + i] = h;
                    out.data_mut()[base + i] = g * h + bt;
                }
            }
        }
        (out, xhat, inv_std)
    }

    /// `update_stats` distinguishes Train (true) from Frozen (false);
    /// both normalize with batch statistics.
    pub fn forward_batch_stats(&mut self, x: &Tensor<T>, update_stats: bool) -> Result<Tensor<T>> {
        let (n, c, s) = self.geometry(x)?;
        let (mean, var) = self.batch_moments(x, n, c, s);
        let (out, xhat, inv_std) = self.normalize(x, &mean, &var, n, c, s);
        if update_stats {
            let m = (n * s) as f64;
            let momentum = T::cast(BN_MOMENTUM);
            let keep = T::one() - momentum;
            // Unbiased variance goes into the running estimate.
            let correction = if m > 1.0 { T::cast(m / (m - 1.0)) } else { T::one() };
            for ch in 0..c {
                self.running_mean.data_mut()[ch] = keep * self.running_mean.data()[ch] + momentum * mean[ch];
                self.running_var.data_mut()[ch] =
                    keep * self.running_var.data()[ch] + momentum * var[ch] * correction;
            }
        }
        self.cache = Some(BnCache { xhat, inv_std, batch_stats: true });
        Ok(out)
    }

    pub fn forward_eval(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, c, s) = self.geometry(x)?;
        let mean: Vec<T> = self.running_mean.data().to_vec();
        let var: Vec<T> = self.running_var.data().to_vec();
        let (out, _, _) = self.normalize(x, &mean, &var, n, c, s);
        Ok(out)
    }

    pub fn forward_eval_cached(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, c, s) = self.geometry(x)?;
        let mean: Vec<T> = self.running_mean.data().to_vec();
        let var: Vec<T> = self.running_var.data().to_vec();
        let (out, xhat, inv_std) = self.normalize(x, &mean, &var, n, c, s);
        self.cache = Some(BnCache { xhat, inv_std, batch_stats: false });
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let cache = self.cache.take().ok_or_else(|| Error::BackwardBeforeForward { layer: "batchnorm".into() })?;
        let (n, c, s) = self.geometry(grad_out)?;
        if grad_out.shape() != cache.xhat.shape() {
            return Err(Error::shape("batchnorm grad", cache.xhat.shape(), grad_out.shape()));
        }
        let m = T::cast((n * s) as f64);
        let mut dgamma = vec![T::zero(); c];
        let mut dbeta = vec![T::zero(); c];
        for b in 0..n {
            for ch in 0..c {
                let base = (b * c + ch) * s;
                for i in 0..s {
                    let g = grad_out.data()[base + i];
                    dbeta[ch] += g;
                    dgamma[ch] += g * cache.xhat.data()[base + i];
                }
            }
        }
        let mut gin = Tensor::zeros(grad_out.shape().to_vec());
        if cache.batch_stats {
            for b in 0..n {
                for ch in 0..c {
                    let base = (b * c + ch) * s;
                    let scale = self.gamma.data()[ch] * cache.inv_std[ch] / m;
                    for i in 0..s {
                        let g = grad_out.data()[base + i];
                        let h = cache.xhat.data()[base + i];
                        gin.data_mut()[base + i] = scale * (m * g - dbeta[ch] - h * dgamma[ch]);
                    }
                }
            }
        } else {
            // Running statistics are constants: the layer is affine.
            for b in 0..n {
                for ch in 0..c {
                    let base = (b * c + ch) * s;
                    let scale = self.gamma.data()[ch] * cache.inv_std[ch];
                    for i in 0..s {
                        gin.data_mut()[base + i] = grad_out.data()[base + i] * scale;
                    }
                }
            }
        }
        self.grad_gamma = Some(Tensor::new(vec![c], dgamma)?);
        self.grad_beta = Some(Tensor::new(vec![c], dbeta)?);
        Ok(gin)
    }

    /// Pure input gradient under eval semantics (affine in x).
    pub fn input_gradient_eval(&self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, c, s) = self.geometry(grad_out)?;
        let eps = T::cast(BN_EPS);
        let mut gin = Tensor::zeros(grad_out.shape().to_vec());
        for b in 0..n {
            for ch in 0..c {
                let base = (b * c + ch) * s;
                let scale = self.gamma.data()[ch] / (self.running_var.data()[ch] + eps).sqrt();
                for i in 0..s {
                    gin.data_mut()[base + i] = grad_out.data()[base + i] * scale;
                }
            }
        }
        Ok(gin)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    #[test]
    fn normalized_output_has_zero_mean_unit_variance_per_channel() {
        let mut rng = rng_from(4);
        let mut bn = BatchNorm::<f64>::new(3, &mut rng);
        // Identity affine so we observe xhat directly.
        bn.gamma = Tensor::filled(vec![3], 1.0);
        bn.beta = Tensor::zeros(vec![3]);
        let mut x = Tensor::zeros(vec![8, 3, 4, 4]);
        fill_normal(x.data_mut(), 2.0, 3.0, &mut rng);
        let y = bn.forward_batch_stats(&x, true).unwrap();
        let s = 16;
        for ch in 0..3 {
            let mut vals = Vec::new();
            for b in 0..8 {
                let base = (b * 3 + ch) * s;
                vals.extend_from_slice(&y.data()[base..base + s]);
            }
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let v = vals.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / vals.len() as f64;
            assert!(m.abs() < 1e-5, "mean {m}");
            assert!((v - 1.0).abs() < 1e-4, "var {v}");
        }
    }

    #[test]
    fn frozen_forward_leaves_running_stats_untouched() {
        let mut rng = rng_from(4);
        let mut bn = BatchNorm::<f64>::new(2, &mut rng);
        let before_m = bn.running_mean.clone();
        let before_v = bn.running_var.clone();
        let mut x = Tensor::zeros(vec![4, 2, 2, 2]);
        fill_normal(x.data_mut(), 1.0, 1.0, &mut rng);
        bn.forward_batch_stats(&x, false).unwrap();
        assert_eq!(bn.running_mean, before_m);
        assert_eq!(bn.running_var, before_v);
        bn.forward_batch_stats(&x, true).unwrap();
        assert_ne!(bn.running_mean, before_m);
    }

    #[test]
    fn eval_uses_running_statistics() {
        let mut rng = rng_from(1);
        let mut bn = BatchNorm::<f64>::new(1, &mut rng);
        bn.gamma = Tensor::filled(vec![1], 2.0);
        bn.beta = Tensor::filled(vec![1], 1.0);
        bn.running_mean = Tensor::filled(vec![1], 3.0);
        bn.running_var = Tensor::filled(vec![1], 4.0);
        let x = Tensor::new(vec![1, 1, 1, 2], vec![3.0, 5.0]).unwrap();
        let y = bn.forward_eval(&x).unwrap();
        // (3-3)/2 * 2 + 1 = 1, (5-3)/2 * 2 + 1 = 3 (up to eps).
        assert!((y.data()[0] - 1.0).abs() < 1e-4);
        assert!((y.data()[1] - 3.0).abs() < 1e-4);
    }

    #[test]
    fn train_backward_matches_finite_differences() {
        let mut rng = rng_from(12);
        let mut bn = BatchNorm::<f64>::new(2, &mut rng);
        let mut x = Tensor::zeros(vec![3, 2, 2, 2]);
        fill_normal(x.data_mut(), 0.5, 1.5, &mut rng);
        let mut up = Tensor::zeros(vec![3, 2, 2, 2]);
        fill_normal(up.data_mut(), 0.0, 1.0, &mut rng);

        let loss = |bn: &mut BatchNorm<f64>, x: &Tensor<f64>| {
            let y = bn.forward_batch_stats(x, false).unwrap();
            y.data().iter().zip(up.data()).map(|(a, b)| a * b).sum::<f64>()
        };
        let _ = loss(&mut bn, &x);
        let gin = bn.backward(&up).unwrap();
        let h = 1e-5;
        for idx in [0usize, 5, 11, 23] {
            let mut xp = x.clone();
            xp.data_mut()[idx] += h;
            let mut xm = x.clone();
            xm.data_mut()[idx] -= h;
            let num = (loss(&mut bn, &xp) - loss(&mut bn, &xm)) / (2.0 * h);
            let ana = gin.data()[idx];
            assert!(
                (num - ana).abs() / num.abs().max(ana.abs()).max(1e-8) < 1e-4,
                "input grad at {idx}: {ana} vs {num}"
            );
        }
    }
}
