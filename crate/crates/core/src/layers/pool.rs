//! Non-overlapping average pooling; spatial dimensions must divide evenly.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct AvgPool2d<T = f64> {
    pub kernel: usize,
    cache: Option<Vec<usize>>,
    _marker: std::marker::PhantomData<T>,
}

impl<T: Scalar> AvgPool2d<T> {
    pub fn new(kernel: usize) -> Self {
        AvgPool2d { kernel, cache: None, _marker: std::marker::PhantomData }
    }

    fn dims(&self, x: &Tensor<T>) -> Result<(usize, usize, usize, usize)> {
        if x.rank() != 4 {
            return Err(Error::shape("avg_pool input", &[0, 0, 0, 0], x.shape()));
        }
        let (n, c, h, w) = (x.dim(0), x.dim(1), x.dim(2), x.dim(3));
        if h % self.kernel != 0 || w % self.kernel != 0 {
            return Err(Error::InvalidShape {
                shape: x.shape().to_vec(),
                message: format!("spatial dims not divisible by pool kernel {}", self.kernel),
            });
        }
        Ok((n, c, h, w))
    }

    pub fn forward_eval(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, c, h, w) = self.dims(x)?;
        let k = self.kernel;
        let (oh, ow) = (h / k, w / k);
        let inv = T::one() / T::cast((k * k) as f64);
        let mut out = Tensor::zeros(vec![n, c, oh, ow]);
        for b in 0..n {
            for ch in 0..c {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = T::zero();
                        for ky in 0..k {
                            let row = ((b * c + ch) * h + oy * k + ky) * w + ox * k;
                            for kx in 0..k {
                                acc += x.data()[row + kx];
                            }
                        }
                        out.data_mut()[((b * c + ch) * oh + oy) * ow + ox] = acc * inv;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn forward_cached(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let out = self.forward_eval(x)?;
        self.cache = Some(x.shape().to_vec());
        Ok(out)
    }

    /// Pure gradient: spreads each output gradient uniformly over its window.
    pub fn input_gradient(&self, in_shape: &[usize], grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let k = self.kernel;
        let (n, c, h, w) = (in_shape[0], in_shape[1], in_shape[2], in_shape[3]);
        let (oh, ow) = (h / k, w / k);
        if grad_out.shape() != [n, c, oh, ow] {
            return Err(Error::shape("avg_pool grad", &[n, c, oh, ow], grad_out.shape()));
        }
        let inv = T::one() / T::cast((k * k) as f64);
        let mut gin = Tensor::zeros(in_shape.to_vec());
        for b in 0..n {
            for ch in 0..c {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let g = grad_out.data()[((b * c + ch) * oh + oy) * ow + ox] * inv;
                        for ky in 0..k {
                            let row = ((b * c + ch) * h + oy * k + ky) * w + ox * k;
                            for kx in 0..k {
                                gin.data_mut()[row + kx] += g;
                            }
                        }
                    }
                }
            }
        }
        Ok(gin)
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self.cache.take().ok_or_else(|| Error::BackwardBeforeForward { layer: "avg_pool".into() })?;
        self.input_gradient(&shape, grad_out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_windows_average() {
        let pool = AvgPool2d::<f64>::new(2);
        let x = Tensor::new(vec![1, 1, 2, 4], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap();
        let y = pool.forward_eval(&x).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 2]);
        assert_eq!(y.data(), &[3.5, 5.5]);
    }

    #[test]
    fn gradient_distributes_uniformly() {
        let mut pool = AvgPool2d::<f64>::new(2);
        let x = Tensor::filled(vec![1, 1, 2, 2], 1.0);
        pool.forward_cached(&x).unwrap();
        let g = pool.backward(&Tensor::new(vec![1, 1, 1, 1], vec![4.0]).unwrap()).unwrap();
        assert_eq!(g.data(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn rejects_indivisible_spatial_dims() {
        let pool = AvgPool2d::<f64>::new(2);
        assert!(pool.forward_eval(&Tensor::<f64>::zeros(vec![1, 1, 3, 4])).is_err());
    }
}
