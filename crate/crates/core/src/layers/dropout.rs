//! Inverted dropout: surviving activations are scaled by 1/(1-rate) at
//! train time so eval is a plain identity.

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub(crate) enum DropCache<T> {
    Identity(Vec<usize>),
    Mask(Tensor<T>),
}

#[derive(Debug, Clone)]
pub struct Dropout<T = f64> {
    pub rate: f64,
    cache: Option<DropCache<T>>,
}

impl<T: Scalar> Dropout<T> {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        Ok(Dropout { rate, cache: None })
    }

    pub fn forward_train(&mut self, x: &Tensor<T>, rng: &mut dyn RngCore) -> Result<Tensor<T>> {
        let keep = 1.0 - self.rate;
        let scale = T::cast(1.0 / keep);
        let mask = Tensor::from_fn(x.shape().to_vec(), |_| {
            if rng.gen::<f64>() < keep {
                scale
            } else {
                T::zero()
            }
        });
        let out = x.hadamard(&mask)?;
        self.cache = Some(DropCache::Mask(mask));
        Ok(out)
    }

    pub fn forward_eval(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(x.clone())
    }

    pub fn forward_eval_cached(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.cache = Some(DropCache::Identity(x.shape().to_vec()));
        Ok(x.clone())
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        match self.cache.take() {
            Some(DropCache::Mask(mask)) => grad_out.hadamard(&mask),
            Some(DropCache::Identity(shape)) => {
                if grad_out.shape() != shape.as_slice() {
                    return Err(Error::shape("dropout grad", &shape, grad_out.shape()));
                }
                Ok(grad_out.clone())
            }
            None => Err(Error::BackwardBeforeForward { layer: "dropout".into() }),
        }
    }
}
