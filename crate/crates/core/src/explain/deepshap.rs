//! DeepLIFT rescale attribution averaged over a set of reference inputs.
//!
//! For each reference r the multiplier transport yields m = dy/dx slopes
//! along the path from r to x; contributions C = m o (x - r) then satisfy
//! sum(C) = f(x) - f(r) exactly for this layer set, which is the property
//! the tests pin down. Averaging C over the references gives the final
//! attribution.

use rand::RngCore;

use crate::data::dataset::Dataset;
use crate::error::{Error, Result};
use crate::network::Network;
use crate::tensor::Tensor;

/// Baseline inputs for attribution; conventionally a handful of training
/// images.
#[derive(Debug, Clone)]
pub struct ReferenceSet {
    images: Tensor<f64>,
}

pub const DEFAULT_REFERENCES: usize = 8;

impl ReferenceSet {
    pub fn new(images: Tensor<f64>) -> Result<Self> {
        if images.rank() < 2 {
            return Err(Error::InvalidShape {
                shape: images.shape().to_vec(),
                message: "reference set needs a leading batch dimension".into(),
            });
        }
        Ok(ReferenceSet { images })
    }

    /// Draws `count` examples from the dataset without replacement.
    pub fn from_dataset(data: &Dataset, count: usize, rng: &mut dyn RngCore) -> Result<Self> {
        if count == 0 || count > data.len() {
            return Err(Error::Config(format!(
                "cannot draw {count} references from {} examples",
                data.len()
            )));
        }
        use rand::Rng;
        let mut pool: Vec<usize> = (0..data.len()).collect();
        for i in 0..count {
            let j = rng.gen_range(i..pool.len());
            pool.swap(i, j);
        }
        pool.truncate(count);
        pool.sort_unstable();
        ReferenceSet::new(data.select(&pool)?)
    }

    pub fn len(&self) -> usize {
        self.images.dim(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn images(&self) -> &Tensor<f64> {
        &self.images
    }

    fn example_shape(&self) -> &[usize] {
        &self.images.shape()[1..]
    }
}

/// Per-reference contributions for one example of shape (1, ...).
/// Returns (C, delta_o) where C has one row per reference and delta_o[j]
/// is f(x) - f(ref_j).
pub fn per_reference_contributions(
    d: &Network<f64>,
    x: &Tensor<f64>,
    refs: &ReferenceSet,
) -> Result<(Tensor<f64>, Vec<f64>)> {
    if x.dim(0) != 1 {
        return Err(Error::InvalidShape {
            shape: x.shape().to_vec(),
            message: "per-reference attribution explains one example".into(),
        });
    }
    if &x.shape()[1..] != refs.example_shape() {
        return Err(Error::shape("reference example shape", &x.shape()[1..], refs.example_shape()));
    }
    let r = refs.len();
    let x_tiled = x.tile_rows(r)?;
    let trace_x = d.trace_eval(&x_tiled)?;
    let trace_r = d.trace_eval(refs.images())?;
    let out_shape = trace_x.output().shape().to_vec();
    let m_out = Tensor::filled(out_shape, 1.0);
    let m = d.multipliers_from_traces(&trace_x, &trace_r, &m_out)?;
    let contributions = m.hadamard(&x_tiled.sub(refs.images())?)?;
    let delta: Vec<f64> = (0..r)
        .map(|j| trace_x.output().data()[j] - trace_r.output().data()[j])
        .collect();
    Ok((contributions, delta))
}

/// Mean attribution over the reference set, shape of `x` (one example).
pub fn explain_deepshap(d: &Network<f64>, x: &Tensor<f64>, refs: &ReferenceSet) -> Result<Tensor<f64>> {
    let (contributions, _) = per_reference_contributions(d, x, refs)?;
    Ok(mean_rows(&contributions, refs.len(), x.shape().to_vec()))
}

/// Batched variant: every example in `xs` explained against the same
/// reference set in one network pass.
pub fn explain_deepshap_batch(
    d: &Network<f64>,
    xs: &Tensor<f64>,
    refs: &ReferenceSet,
) -> Result<Tensor<f64>> {
    if &xs.shape()[1..] != refs.example_shape() {
        return Err(Error::shape("reference example shape", &xs.shape()[1..], refs.example_shape()));
    }
    let n = xs.dim(0);
    let r = refs.len();
    // Row layout: example 0 repeated r times, then example 1, ...
    let row = xs.row_len();
    let mut x_big = Tensor::zeros({
        let mut s = xs.shape().to_vec();
        s[0] = n * r;
        s
    });
    for e in 0..n {
        for j in 0..r {
            let dst = (e * r + j) * row;
            x_big.data_mut()[dst..dst + row].copy_from_slice(&xs.data()[e * row..(e + 1) * row]);
        }
    }
    let ref_big = {
        let mut t = Tensor::zeros(x_big.shape().to_vec());
        let src = refs.images().data();
        for e in 0..n {
            t.data_mut()[e * r * row..(e + 1) * r * row].copy_from_slice(src);
        }
        t
    };
    let trace_x = d.trace_eval(&x_big)?;
    let trace_r = d.trace_eval(&ref_big)?;
    let m_out = Tensor::filled(trace_x.output().shape().to_vec(), 1.0);
    let m = d.multipliers_from_traces(&trace_x, &trace_r, &m_out)?;
    let contributions = m.hadamard(&x_big.sub(&ref_big)?)?;

    // Average each block of r consecutive rows.
    let mut out = Tensor::zeros(xs.shape().to_vec());
    let src = contributions.data();
    let dst = out.data_mut();
    for e in 0..n {
        for j in 0..r {
            let base = (e * r + j) * row;
            for i in 0..row {
                dst[e * row + i] += src[base + i];
            }
        }
        for i in 0..row {
            dst[e * row + i] /= r as f64;
        }
    }
    Ok(out)
}

fn mean_rows(t: &Tensor<f64>, rows: usize, out_shape: Vec<usize>) -> Tensor<f64> {
    let row = t.row_len();
    let mut out = Tensor::zeros(out_shape);
    for j in 0..rows {
        for i in 0..row {
            out.data_mut()[i] += t.data()[j * row + i];
        }
    }
    for v in out.data_mut() {
        *v /= rows as f64;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::{Dense, Layer, LeakyRelu, SigmoidLayer, TanhLayer};
    use crate::rng::rng_from;

    fn linear(w: &[f64], b: f64) -> Network<f64> {
        Network::new(
            "lin",
            vec![Layer::Dense(
                Dense::from_parts(
                    Tensor::new(vec![1, w.len()], w.to_vec()).unwrap(),
                    Tensor::new(vec![1], vec![b]).unwrap(),
                )
                .unwrap(),
            )],
        )
    }

    #[test]
    fn linear_model_gives_w_times_delta() {
        // f(x) = w.x + b, single zero reference: C_i = w_i * x_i.
        let d = linear(&[1.0, 2.0], 0.5);
        let x = Tensor::new(vec![1, 2], vec![1.0, 1.0]).unwrap();
        let refs = ReferenceSet::new(Tensor::zeros(vec![1, 2])).unwrap();
        let (c, delta) = per_reference_contributions(&d, &x, &refs).unwrap();
        assert_eq!(c.data(), &[1.0, 2.0]);
        assert!((delta[0] - 3.0).abs() < 1e-15, "f(x)-f(0) = 3 regardless of bias");
        let attribution = explain_deepshap(&d, &x, &refs).unwrap();
        assert_eq!(attribution.data(), &[1.0, 2.0]);
    }

    #[test]
    fn instance_equal_to_reference_attributes_nothing() {
        let mut r = rng_from(2);
        let d = Network::new(
            "net",
            vec![
                Layer::Dense(Dense::new(3, 4, &mut r)),
                Layer::Tanh(TanhLayer::new()),
                Layer::Dense(Dense::new(4, 1, &mut r)),
                Layer::Sigmoid(SigmoidLayer::new()),
            ],
        );
        let x = Tensor::new(vec![1, 3], vec![0.2, -0.5, 0.9]).unwrap();
        let refs = ReferenceSet::new(x.clone()).unwrap();
        let a = explain_deepshap(&d, &x, &refs).unwrap();
        assert_eq!(a.data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn contributions_sum_to_output_delta_per_reference() {
        let mut r = rng_from(9);
        let d = Network::new(
            "net",
            vec![
                Layer::Dense(Dense::new(5, 7, &mut r)),
                Layer::LeakyRelu(LeakyRelu::new(0.2)),
                Layer::Dense(Dense::new(7, 4, &mut r)),
                Layer::Tanh(TanhLayer::new()),
                Layer::Dense(Dense::new(4, 1, &mut r)),
                Layer::Sigmoid(SigmoidLayer::new()),
            ],
        );
        let x = Tensor::from_fn(vec![1, 5], |i| ((i * 7) as f64 % 5.0) / 2.5 - 1.0);
        let mut refs_data = Tensor::zeros(vec![4, 5]);
        crate::rng::fill_normal(refs_data.data_mut(), 0.0, 0.7, &mut r);
        let refs = ReferenceSet::new(refs_data).unwrap();
        let (c, delta) = per_reference_contributions(&d, &x, &refs).unwrap();
        for j in 0..4 {
            let sum: f64 = c.data()[j * 5..(j + 1) * 5].iter().sum();
            assert!((sum - delta[j]).abs() < 1e-6, "ref {j}: {sum} vs {}", delta[j]);
        }
    }

    #[test]
    fn batch_path_equals_per_example_path() {
        let mut r = rng_from(13);
        let d = Network::new(
            "net",
            vec![
                Layer::Dense(Dense::new(4, 6, &mut r)),
                Layer::LeakyRelu(LeakyRelu::new(0.2)),
                Layer::Dense(Dense::new(6, 1, &mut r)),
                Layer::Sigmoid(SigmoidLayer::new()),
            ],
        );
        let xs = Tensor::from_fn(vec![3, 4], |i| ((i * 3) as f64 % 11.0) / 5.5 - 1.0);
        let mut refs_data = Tensor::zeros(vec![2, 4]);
        crate::rng::fill_normal(refs_data.data_mut(), 0.0, 0.5, &mut r);
        let refs = ReferenceSet::new(refs_data).unwrap();

        let batched = explain_deepshap_batch(&d, &xs, &refs).unwrap();
        for e in 0..3 {
            let solo = explain_deepshap(&d, &xs.example(e).unwrap().unsqueeze(), &refs).unwrap();
            let got = &batched.data()[e * 4..(e + 1) * 4];
            for (g, s) in got.iter().zip(solo.data()) {
                assert!((g - s).abs() < 1e-12, "example {e}: {g} vs {s}");
            }
        }
    }

    #[test]
    fn reference_shape_mismatch_is_rejected() {
        let d = linear(&[1.0, 1.0], 0.0);
        let x = Tensor::new(vec![1, 2], vec![1.0, 1.0]).unwrap();
        let refs = ReferenceSet::new(Tensor::zeros(vec![1, 3])).unwrap();
        assert!(per_reference_contributions(&d, &x, &refs).is_err());
    }

    #[test]
    fn drawing_references_from_a_dataset_is_deterministic() {
        let d = crate::data::synth::synth_dataset(20, 3).unwrap();
        let a = ReferenceSet::from_dataset(&d, 8, &mut rng_from(5)).unwrap();
        let b = ReferenceSet::from_dataset(&d, 8, &mut rng_from(5)).unwrap();
        assert_eq!(a.len(), 8);
        assert_eq!(a.images().data(), b.images().data());
        assert!(ReferenceSet::from_dataset(&d, 0, &mut rng_from(5)).is_err());
        assert!(ReferenceSet::from_dataset(&d, 21, &mut rng_from(5)).is_err());
    }
}
