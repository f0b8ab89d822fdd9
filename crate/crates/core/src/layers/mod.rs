//! Layer catalogue and the uniform interface the network drives.
//!
//! Three forward phases:
//! * `Train`    - stochastic regularizers active, batch statistics used and
//!                running statistics updated;
//! * `Frozen`   - identical math to `Train` but no internal state is
//!                written; used for the non-updated network inside each GAN
//!                step and for finite-difference checks;
//! * `Eval`     - deterministic inference (dropout off, running stats).
//!
//! Besides the cached train path (`forward` + `backward`), every layer has
//! a pure eval path: `forward_eval`, `input_gradient_from` (gradient given
//! boundary activations) and `multipliers` (DeepLIFT rescale transport).
//! The pure path is what explainers use, so explaining never perturbs
//! training caches.

pub mod activation;
pub mod batchnorm;
pub mod conv;
pub mod dense;
pub mod dropout;
pub mod pool;
pub mod shape_ops;

pub use activation::{sigmoid_scalar, LeakyRelu, SigmoidLayer, TanhLayer};
pub use batchnorm::BatchNorm;
pub use conv::{conv_out_size, conv_transpose_out_size, Conv2d, ConvTranspose2d};
pub use dense::Dense;
pub use dropout::Dropout;
pub use pool::AvgPool2d;
pub use shape_ops::{Flatten, Reshape};

use rand::RngCore;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Frozen,
    Eval,
}

/// Interval width below which the rescale rule falls back to the local
/// derivative (the quotient (y - y_ref)/(x - x_ref) becomes meaningless).
const RESCALE_EPS: f64 = 1e-7;

#[derive(Debug, Clone)]
pub enum Layer<T = f64> {
    Dense(Dense<T>),
    Conv2d(Conv2d<T>),
    ConvTranspose2d(ConvTranspose2d<T>),
    BatchNorm(BatchNorm<T>),
    Dropout(Dropout<T>),
    LeakyRelu(LeakyRelu<T>),
    Tanh(TanhLayer<T>),
    Sigmoid(SigmoidLayer<T>),
    AvgPool2d(AvgPool2d<T>),
    Flatten(Flatten),
    Reshape(Reshape),
}

/// One trainable parameter of a layer, paired with its gradient slot.
pub struct ParamGradMut<'a, T> {
    pub name: &'static str,
    pub value: &'a mut Tensor<T>,
    pub grad: Option<&'a Tensor<T>>,
}

impl<T: Scalar> Layer<T> {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Layer::Dense(_) => "dense",
            Layer::Conv2d(_) => "conv2d",
            Layer::ConvTranspose2d(_) => "conv_transpose2d",
            Layer::BatchNorm(_) => "batchnorm",
            Layer::Dropout(_) => "dropout",
            Layer::LeakyRelu(_) => "leaky_relu",
            Layer::Tanh(_) => "tanh",
            Layer::Sigmoid(_) => "sigmoid",
            Layer::AvgPool2d(_) => "avg_pool2d",
            Layer::Flatten(_) => "flatten",
            Layer::Reshape(_) => "reshape",
        }
    }

    pub fn forward(&mut self, x: &Tensor<T>, phase: Phase, rng: &mut dyn RngCore) -> Result<Tensor<T>> {
        match self {
            Layer::Dense(l) => l.forward_cached(x),
            Layer::Conv2d(l) => l.forward_cached(x),
            Layer::ConvTranspose2d(l) => l.forward_cached(x),
            Layer::BatchNorm(l) => match phase {
                Phase::Train => l.forward_batch_stats(x, true),
                Phase::Frozen => l.forward_batch_stats(x, false),
                Phase::Eval => l.forward_eval_cached(x),
            },
            Layer::Dropout(l) => match phase {
                Phase::Train | Phase::Frozen => l.forward_train(x, rng),
                Phase::Eval => l.forward_eval_cached(x),
            },
            Layer::LeakyRelu(l) => l.forward_cached(x),
            Layer::Tanh(l) => l.forward_cached(x),
            Layer::Sigmoid(l) => l.forward_cached(x),
            Layer::AvgPool2d(l) => l.forward_cached(x),
            Layer::Flatten(l) => l.forward_cached(x),
            Layer::Reshape(l) => l.forward_cached(x),
        }
    }

    /// Pure inference; never touches caches or internal state.
    pub fn forward_eval(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        match self {
            Layer::Dense(l) => l.forward_eval(x),
            Layer::Conv2d(l) => l.forward_eval(x),
            Layer::ConvTranspose2d(l) => l.forward_eval(x),
            Layer::BatchNorm(l) => l.forward_eval(x),
            Layer::Dropout(l) => l.forward_eval(x),
            Layer::LeakyRelu(l) => l.forward_eval(x),
            Layer::Tanh(l) => l.forward_eval(x),
            Layer::Sigmoid(l) => l.forward_eval(x),
            Layer::AvgPool2d(l) => l.forward_eval(x),
            Layer::Flatten(l) => l.forward_eval(x),
            Layer::Reshape(l) => l.forward_eval(x),
        }
    }

    /// Consumes the forward cache; parameter gradients are stored on the
    /// layer (overwriting any previous ones), the input gradient returns.
    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        match self {
            Layer::Dense(l) => l.backward(grad_out),
            Layer::Conv2d(l) => l.backward(grad_out),
            Layer::ConvTranspose2d(l) => l.backward(grad_out),
            Layer::BatchNorm(l) => l.backward(grad_out),
            Layer::Dropout(l) => l.backward(grad_out),
            Layer::LeakyRelu(l) => l.backward(grad_out),
            Layer::Tanh(l) => l.backward(grad_out),
            Layer::Sigmoid(l) => l.backward(grad_out),
            Layer::AvgPool2d(l) => l.backward(grad_out),
            Layer::Flatten(l) => l.backward(grad_out),
            Layer::Reshape(l) => l.backward(grad_out),
        }
    }

    /// Pure input gradient under eval semantics, given the boundary
    /// activations recorded by a pure forward.
    pub fn input_gradient_from(
        &self,
        x_in: &Tensor<T>,
        x_out: &Tensor<T>,
        grad_out: &Tensor<T>,
    ) -> Result<Tensor<T>> {
        match self {
            Layer::Dense(l) => l.input_gradient(grad_out),
            Layer::Conv2d(l) => l.input_gradient(x_in.shape(), grad_out),
            Layer::ConvTranspose2d(l) => l.input_gradient(x_in.shape(), grad_out),
            Layer::BatchNorm(l) => l.input_gradient_eval(grad_out),
            Layer::Dropout(_) => Ok(grad_out.clone()),
            Layer::LeakyRelu(l) => grad_out.zip_map(x_in, |g, v| g * l.derivative_at(v)),
            Layer::Tanh(_) => grad_out.zip_map(x_out, |g, y| g * (T::one() - y * y)),
            Layer::Sigmoid(_) => grad_out.zip_map(x_out, |g, y| g * y * (T::one() - y)),
            Layer::AvgPool2d(l) => l.input_gradient(x_in.shape(), grad_out),
            Layer::Flatten(_) => grad_out.reshape(x_in.shape().to_vec()),
            Layer::Reshape(_) => grad_out.reshape(x_in.shape().to_vec()),
        }
    }

    /// Transports DeepLIFT multipliers from output to input. Linear layers
    /// reuse the gradient transport (they are their own rescale); the
    /// elementwise nonlinearities divide output deltas by input deltas.
    pub fn multipliers(
        &self,
        x_in: &Tensor<T>,
        x_out: &Tensor<T>,
        r_in: &Tensor<T>,
        r_out: &Tensor<T>,
        m_out: &Tensor<T>,
    ) -> Result<Tensor<T>> {
        let rescale = |deriv: &dyn Fn(T) -> T| -> Result<Tensor<T>> {
            if x_in.shape() != r_in.shape() {
                return Err(Error::shape("rescale reference", x_in.shape(), r_in.shape()));
            }
            let eps = T::cast(RESCALE_EPS);
            let mut out = Tensor::zeros(x_in.shape().to_vec());
            for i in 0..out.len() {
                let dx = x_in.data()[i] - r_in.data()[i];
                let slope = if dx.abs() > eps {
                    (x_out.data()[i] - r_out.data()[i]) / dx
                } else {
                    deriv(x_in.data()[i])
                };
                out.data_mut()[i] = m_out.data()[i] * slope;
            }
            Ok(out)
        };
        match self {
            Layer::LeakyRelu(l) => rescale(&|v| l.derivative_at(v)),
            Layer::Tanh(_) => rescale(&|v: T| {
                let y = v.tanh();
                T::one() - y * y
            }),
            Layer::Sigmoid(_) => rescale(&|v: T| {
                let y = sigmoid_scalar(v);
                y * (T::one() - y)
            }),
            // Everything else is linear (or affine) under eval semantics,
            // where gradient transport and multiplier transport coincide.
            _ => self.input_gradient_from(x_in, x_out, m_out),
        }
    }

    pub fn params(&self) -> Vec<(&'static str, &Tensor<T>)> {
        match self {
            Layer::Dense(l) => vec![("weight", &l.weight), ("bias", &l.bias)],
            Layer::Conv2d(l) => vec![("weight", &l.weight), ("bias", &l.bias)],
            Layer::ConvTranspose2d(l) => vec![("weight", &l.weight), ("bias", &l.bias)],
            Layer::BatchNorm(l) => vec![("gamma", &l.gamma), ("beta", &l.beta)],
            _ => vec![],
        }
    }

    pub fn params_with_grads_mut(&mut self) -> Vec<ParamGradMut<'_, T>> {
        match self {
            Layer::Dense(l) => vec![
                ParamGradMut { name: "weight", value: &mut l.weight, grad: l.grad_weight.as_ref() },
                ParamGradMut { name: "bias", value: &mut l.bias, grad: l.grad_bias.as_ref() },
            ],
            Layer::Conv2d(l) => vec![
                ParamGradMut { name: "weight", value: &mut l.weight, grad: l.grad_weight.as_ref() },
                ParamGradMut { name: "bias", value: &mut l.bias, grad: l.grad_bias.as_ref() },
            ],
            Layer::ConvTranspose2d(l) => vec![
                ParamGradMut { name: "weight", value: &mut l.weight, grad: l.grad_weight.as_ref() },
                ParamGradMut { name: "bias", value: &mut l.bias, grad: l.grad_bias.as_ref() },
            ],
            Layer::BatchNorm(l) => vec![
                ParamGradMut { name: "gamma", value: &mut l.gamma, grad: l.grad_gamma.as_ref() },
                ParamGradMut { name: "beta", value: &mut l.beta, grad: l.grad_beta.as_ref() },
            ],
            _ => vec![],
        }
    }

    /// Trainable parameters plus persistent buffers, for serialization.
    pub fn state(&self) -> Vec<(&'static str, &Tensor<T>)> {
        match self {
            Layer::BatchNorm(l) => vec![
                ("gamma", &l.gamma),
                ("beta", &l.beta),
                ("running_mean", &l.running_mean),
                ("running_var", &l.running_var),
            ],
            other => other.params(),
        }
    }

    pub fn state_mut(&mut self) -> Vec<(&'static str, &mut Tensor<T>)> {
        match self {
            Layer::Dense(l) => vec![("weight", &mut l.weight), ("bias", &mut l.bias)],
            Layer::Conv2d(l) => vec![("weight", &mut l.weight), ("bias", &mut l.bias)],
            Layer::ConvTranspose2d(l) => vec![("weight", &mut l.weight), ("bias", &mut l.bias)],
            Layer::BatchNorm(l) => vec![
                ("gamma", &mut l.gamma),
                ("beta", &mut l.beta),
                ("running_mean", &mut l.running_mean),
                ("running_var", &mut l.running_var),
            ],
            _ => vec![],
        }
    }
}
