//! Adam with per-parameter first/second moment estimates and bias
//! correction. Moments live outside the network, keyed by position, so the
//! same network can be stepped by different optimizer instances in tests.

use crate::error::{Error, Result};
use crate::network::Network;
use crate::scalar::Scalar;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
struct Moments<T> {
    m: Vec<T>,
    v: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct AdamState<T = f64> {
    lr: T,
    beta1: T,
    beta2: T,
    eps: T,
    /// Update count; bias correction uses t starting at 1.
    t: u64,
    slots: Vec<Moments<T>>,
}

impl<T: Scalar> AdamState<T> {
    /// Moment buffers sized to match `net`'s trainable parameters, in
    /// `params_with_grads_mut` order.
    pub fn for_network(net: &Network<T>, lr: f64) -> Self {
        let slots = net
            .params()
            .iter()
            .map(|(_, p)| Moments { m: vec![T::zero(); p.len()], v: vec![T::zero(); p.len()] })
            .collect();
        AdamState {
            lr: T::cast(lr),
            beta1: T::cast(ADAM_BETA1),
            beta2: T::cast(ADAM_BETA2),
            eps: T::cast(ADAM_EPS),
            t: 0,
            slots,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// Applies one update from the gradients currently stored on `net`.
    /// Parameters whose gradient slot is empty (layer never run backward)
    /// are left untouched; this is what lets a frozen discriminator sit
    /// inside a generator step without being perturbed.
    pub fn step(&mut self, net: &mut Network<T>) -> Result<()> {
        let net_name = net.name.clone();
        let params = net.params_with_grads_mut();
        if params.len() != self.slots.len() {
            return Err(Error::Config(format!(
                "optimizer tracks {} tensors, network {net_name} has {}",
                self.slots.len(),
                params.len()
            )));
        }
        self.t += 1;
        let t = self.t;
        let (lr, b1, b2, eps) = (self.lr, self.beta1, self.beta2, self.eps);
        for ((name, p), slot) in params.into_iter().zip(&mut self.slots) {
            let Some(grad) = p.grad else { continue };
            if grad.len() != p.value.len() {
                return Err(Error::shape(format!("gradient for {name}"), p.value.shape(), grad.shape()));
            }
            adam_step(
                p.value.data_mut(),
                grad.data(),
                &mut slot.m,
                &mut slot.v,
                lr,
                b1,
                b2,
                eps,
                t,
            );
        }
        Ok(())
    }
}

/// One Adam update on a raw slice; exposed for the classifier trainer.
#[allow(clippy::too_many_arguments)]
pub fn adam_step<T: Scalar>(
    value: &mut [T],
    grad: &[T],
    m: &mut [T],
    v: &mut [T],
    lr: T,
    beta1: T,
    beta2: T,
    eps: T,
    t: u64,
) {
    let one = T::one();
    let bc1 = one - beta1.powi(t as i32);
    let bc2 = one - beta2.powi(t as i32);
    for i in 0..value.len() {
        let g = grad[i];
        m[i] = beta1 * m[i] + (one - beta1) * g;
        v[i] = beta2 * v[i] + (one - beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        value[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::{Dense, Layer, Phase};
    use crate::loss::bce_mean;
    use crate::rng;
    use crate::tensor::Tensor;

    #[test]
    fn first_step_moves_each_parameter_by_about_lr() {
        // With fresh moments, m_hat/sqrt(v_hat) = sign(g), so the first
        // update is -lr * g/(|g| + tiny) for every touched parameter.
        let mut value = [1.0f64, -2.0, 0.5];
        let grad = [0.3f64, -4.0, 0.001];
        let (mut m, mut v) = ([0.0; 3], [0.0; 3]);
        adam_step(&mut value, &grad, &mut m, &mut v, 0.0002, 0.9, 0.999, 1e-8, 1);
        let expect = [1.0 - 0.0002, -2.0 + 0.0002, 0.5 - 0.0002];
        for (a, e) in value.iter().zip(expect) {
            assert!((a - e).abs() < 1e-8, "{a} vs {e}");
        }
    }

    #[test]
    fn zero_gradient_leaves_parameter_unchanged() {
        let mut value = [3.0f64];
        let (mut m, mut v) = ([0.0], [0.0]);
        adam_step(&mut value, &[0.0], &mut m, &mut v, 0.1, 0.9, 0.999, 1e-8, 1);
        assert_eq!(value, [3.0]);
    }

    #[test]
    fn stepping_a_network_reduces_a_convex_loss() {
        let mut r = rng::rng_from(11);
        let mut net = Network::new(
            "probe",
            vec![Layer::Dense(Dense::new(2, 1, &mut r)), Layer::Sigmoid(crate::layers::SigmoidLayer::new())],
        );
        let mut opt = AdamState::for_network(&net, 0.05);
        let x = Tensor::new(vec![4, 2], vec![0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0]).unwrap();

        let loss_at = |net: &mut Network<f64>, do_step: &mut dyn FnMut(&mut Network<f64>)| {
            let mut rr = rng::rng_from(0);
            let y = net.forward(&x, Phase::Train, &mut rr).unwrap();
            let lg = bce_mean(&y, 1.0).unwrap();
            net.backward(&lg.grad).unwrap();
            do_step(net);
            lg.value
        };

        let before = loss_at(&mut net, &mut |n| opt.step(n).unwrap());
        for _ in 0..50 {
            loss_at(&mut net, &mut |n| opt.step(n).unwrap());
        }
        let after = loss_at(&mut net, &mut |_| {});
        assert!(after < before, "loss {before} -> {after}");
    }

    #[test]
    fn skips_parameters_without_gradients() {
        let mut r = rng::rng_from(3);
        let mut net = Network::new("idle", vec![Layer::Dense(Dense::new(2, 2, &mut r))]);
        let snapshot: Vec<f64> = net.params()[0].1.data().to_vec();
        let mut opt = AdamState::for_network(&net, 0.1);
        opt.step(&mut net).unwrap();
        assert_eq!(net.params()[0].1.data(), &snapshot[..]);
    }
}
