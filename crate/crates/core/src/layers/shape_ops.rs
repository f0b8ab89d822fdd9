//! Shape adapters between dense and spatial stages. Pure data movement;
//! gradients are the inverse reshape.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// (n, d0, d1, ...) -> (n, d0*d1*...)
#[derive(Debug, Clone, Default)]
pub struct Flatten {
    cache: Option<Vec<usize>>,
}

impl Flatten {
    pub fn new() -> Self {
        Flatten { cache: None }
    }

    pub fn forward_eval<T: Scalar>(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        x.reshape(vec![x.dim(0), x.row_len()])
    }

    pub fn forward_cached<T: Scalar>(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.cache = Some(x.shape().to_vec());
        self.forward_eval(x)
    }

    pub fn backward<T: Scalar>(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self.cache.take().ok_or_else(|| Error::BackwardBeforeForward { layer: "flatten".into() })?;
        grad_out.reshape(shape)
    }
}

/// (n, flat) -> (n, target...) with a fixed per-example target shape.
#[derive(Debug, Clone)]
pub struct Reshape {
    pub example_shape: Vec<usize>,
    cache: Option<Vec<usize>>,
}

impl Reshape {
    pub fn new(example_shape: Vec<usize>) -> Self {
        Reshape { example_shape, cache: None }
    }

    fn out_shape(&self, n: usize) -> Vec<usize> {
        let mut s = Vec::with_capacity(self.example_shape.len() + 1);
        s.push(n);
        s.extend_from_slice(&self.example_shape);
        s
    }

    pub fn forward_eval<T: Scalar>(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let want: usize = self.example_shape.iter().product();
        if x.row_len() != want {
            return Err(Error::shape("reshape", &self.example_shape, x.shape()));
        }
        x.reshape(self.out_shape(x.dim(0)))
    }

    pub fn forward_cached<T: Scalar>(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.cache = Some(x.shape().to_vec());
        self.forward_eval(x)
    }

    pub fn backward<T: Scalar>(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self.cache.take().ok_or_else(|| Error::BackwardBeforeForward { layer: "reshape".into() })?;
        grad_out.reshape(shape)
    }
}
