//! Fully-connected layer. Weight is (out, in), row-major, so both the
//! forward pass and the weight gradient walk contiguous memory.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot};
use crate::rng::fill_uniform;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct Dense<T = f64> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub(crate) grad_weight: Option<Tensor<T>>,
    pub(crate) grad_bias: Option<Tensor<T>>,
    cache: Option<Tensor<T>>,
}

impl<T: Scalar> Dense<T> {
    /// Uniform(-1/sqrt(in), 1/sqrt(in)) init for weight and bias.
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut dyn RngCore) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let mut weight = Tensor::zeros(vec![out_dim, in_dim]);
        fill_uniform(weight.data_mut(), -bound, bound, rng);
        let mut bias = Tensor::zeros(vec![out_dim]);
        fill_uniform(bias.data_mut(), -bound, bound, rng);
        Dense { weight, bias, grad_weight: None, grad_bias: None, cache: None }
    }

    pub fn from_parts(weight: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        if weight.rank() != 2 || bias.rank() != 1 || bias.dim(0) != weight.dim(0) {
            return Err(Error::shape("dense parts", weight.shape(), bias.shape()));
        }
        Ok(Dense { weight, bias, grad_weight: None, grad_bias: None, cache: None })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.dim(1)
    }

    pub fn out_dim(&self) -> usize {
        self.weight.dim(0)
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        if x.rank() != 2 || x.dim(1) != self.in_dim() {
            return Err(Error::shape("dense input", &[0, self.in_dim()], x.shape()));
        }
        Ok(())
    }

    pub fn forward_eval(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let (n, i_dim, o_dim) = (x.dim(0), self.in_dim(), self.out_dim());
        let mut out = Tensor::zeros(vec![n, o_dim]);
        let w = self.weight.data();
        let b = self.bias.data();
        for r in 0..n {
            let xr = &x.data()[r * i_dim..(r + 1) * i_dim];
            let or = &mut out.data_mut()[r * o_dim..(r + 1) * o_dim];
            for o in 0..o_dim {
                or[o] = b[o] + dot(xr, &w[o * i_dim..(o + 1) * i_dim]);
            }
        }
        Ok(out)
    }

    pub fn forward_cached(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let out = self.forward_eval(x)?;
        self.cache = Some(x.clone());
        Ok(out)
    }

    pub fn input_gradient(&self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let (i_dim, o_dim) = (self.in_dim(), self.out_dim());
        if grad_out.rank() != 2 || grad_out.dim(1) != o_dim {
            return Err(Error::shape("dense grad", &[0, o_dim], grad_out.shape()));
        }
        let n = grad_out.dim(0);
        let mut gin = Tensor::zeros(vec![n, i_dim]);
        let w = self.weight.data();
        for r in 0..n {
            let gr = &grad_out.data()[r * o_dim..(r + 1) * o_dim];
            let row = &mut gin.data_mut()[r * i_dim..(r + 1) * i_dim];
            for o in 0..o_dim {
                let g = gr[o];
                if g == T::zero() {
                    continue;
                }
                axpy(g, &w[o * i_dim..(o + 1) * i_dim], row);
            }
        }
        Ok(gin)
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.cache.take().ok_or_else(|| Error::BackwardBeforeForward { layer: "dense".into() })?;
        let (n, i_dim, o_dim) = (x.dim(0), self.in_dim(), self.out_dim());
        if grad_out.shape() != [n, o_dim] {
            return Err(Error::shape("dense grad", &[n, o_dim], grad_out.shape()));
        }
        let mut gw = Tensor::zeros(vec![o_dim, i_dim]);
        let mut gb = Tensor::zeros(vec![o_dim]);
        for r in 0..n {
            let gr = &grad_out.data()[r * o_dim..(r + 1) * o_dim];
            let xr = &x.data()[r * i_dim..(r + 1) * i_dim];
            for o in 0..o_dim {
                let g = gr[o];
                gb.data_mut()[o] += g;
                if g == T::zero() {
                    continue;
                }
                axpy(g, xr, &mut gw.data_mut()[o * i_dim..(o + 1) * i_dim]);
            }
        }
        let gin = self.input_gradient(grad_out)?;
        self.grad_weight = Some(gw);
        self.grad_bias = Some(gb);
        Ok(gin)
    }
}
