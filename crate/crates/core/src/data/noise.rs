//! Generator input: standard normal noise, shape (batch, dim).

use rand::RngCore;

use crate::error::{Error, Result};
use crate::rng::fill_normal;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub fn sample_noise<T: Scalar>(batch: usize, dim: usize, rng: &mut dyn RngCore) -> Result<Tensor<T>> {
    if batch == 0 || dim == 0 {
        return Err(Error::Config(format!("noise shape ({batch}, {dim}) needs positive dims")));
    }
    let mut t = Tensor::zeros(vec![batch, dim]);
    fill_normal(t.data_mut(), 0.0, 1.0, rng);
    Ok(t)
}
