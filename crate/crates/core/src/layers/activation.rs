//! Elementwise activations. Each one exposes its pointwise derivative so
//! the attribution code can fall back to it when the rescale rule hits a
//! zero-width interval.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct LeakyRelu<T = f64> {
    pub slope: T,
    cache: Option<Tensor<T>>,
}

impl<T: Scalar> LeakyRelu<T> {
    pub fn new(slope: f64) -> Self {
        LeakyRelu { slope: T::cast(slope), cache: None }
    }

    pub fn apply(&self, v: T) -> T {
        if v > T::zero() {
            v
        } else {
            self.slope * v
        }
    }

    pub fn derivative_at(&self, v: T) -> T {
        if v > T::zero() {
            T::one()
        } else {
            self.slope
        }
    }

    pub fn forward_eval(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(x.map(|v| self.apply(v)))
    }

    pub fn forward_cached(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.cache = Some(x.clone());
        self.forward_eval(x)
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.cache.take().ok_or_else(|| Error::BackwardBeforeForward { layer: "leaky_relu".into() })?;
        grad_out.zip_map(&x, |g, v| g * self.derivative_at(v))
    }
}

#[derive(Debug, Clone, Default)]
pub struct TanhLayer<T = f64> {
    cache: Option<Tensor<T>>,
}

impl<T: Scalar> TanhLayer<T> {
    pub fn new() -> Self {
        TanhLayer { cache: None }
    }

    pub fn forward_eval(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(x.map(|v| v.tanh()))
    }

    /// Caches the output; derivative is 1 - y^2.
    pub fn forward_cached(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.forward_eval(x)?;
        self.cache = Some(y.clone());
        Ok(y)
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.cache.take().ok_or_else(|| Error::BackwardBeforeForward { layer: "tanh".into() })?;
        grad_out.zip_map(&y, |g, yv| g * (T::one() - yv * yv))
    }
}

#[derive(Debug, Clone, Default)]
pub struct SigmoidLayer<T = f64> {
    cache: Option<Tensor<T>>,
}

pub fn sigmoid_scalar<T: Scalar>(v: T) -> T {
    T::one() / (T::one() + (-v).exp())
}

impl<T: Scalar> SigmoidLayer<T> {
    pub fn new() -> Self {
        SigmoidLayer { cache: None }
    }

    pub fn forward_eval(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(x.map(sigmoid_scalar))
    }

    pub fn forward_cached(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.forward_eval(x)?;
        self.cache = Some(y.clone());
        Ok(y)
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.cache.take().ok_or_else(|| Error::BackwardBeforeForward { layer: "sigmoid".into() })?;
        grad_out.zip_map(&y, |g, yv| g * yv * (T::one() - yv))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaky_relu_keeps_positive_and_scales_negative() {
        let l = LeakyRelu::<f64>::new(0.2);
        let x = Tensor::new(vec![1, 3], vec![2.0, -1.0, 0.0]).unwrap();
        let y = l.forward_eval(&x).unwrap();
        assert_eq!(y.data(), &[2.0, -0.2, 0.0]);
    }

    #[test]
    fn tanh_gradient_is_one_at_zero() {
        let mut t = TanhLayer::<f64>::new();
        let x = Tensor::new(vec![1, 1], vec![0.0]).unwrap();
        t.forward_cached(&x).unwrap();
        let g = t.backward(&Tensor::new(vec![1, 1], vec![1.0]).unwrap()).unwrap();
        assert_eq!(g.data(), &[1.0]);
    }

    #[test]
    fn sigmoid_stays_in_unit_interval_and_is_interior_before_saturation() {
        let s = SigmoidLayer::<f64>::new();
        // +/-30 is within f64 resolution of the open interval; +/-50 saturates.
        let x = Tensor::new(vec![1, 5], vec![-50.0, -30.0, 0.0, 30.0, 50.0]).unwrap();
        let y = s.forward_eval(&x).unwrap();
        assert!(y.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(y.data()[1] > 0.0 && y.data()[3] < 1.0);
        assert!((y.data()[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn activation_backwards_match_finite_differences() {
        let x = Tensor::new(vec![1, 4], vec![0.3, -0.7, 1.2, -0.1]).unwrap();
        let up = Tensor::new(vec![1, 4], vec![1.0, -0.5, 0.25, 2.0]).unwrap();
        let h = 1e-6;

        let mut tanh = TanhLayer::<f64>::new();
        tanh.forward_cached(&x).unwrap();
        let g = tanh.backward(&up).unwrap();
        for i in 0..4 {
            let mut xp = x.clone();
            xp.data_mut()[i] += h;
            let mut xm = x.clone();
            xm.data_mut()[i] -= h;
            let f = |t: &Tensor<f64>| {
                t.map(|v| v.tanh())
                    .data()
                    .iter()
                    .zip(up.data())
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            };
            let num = (f(&xp) - f(&xm)) / (2.0 * h);
            assert!((num - g.data()[i]).abs() < 1e-8);
        }
    }
}
