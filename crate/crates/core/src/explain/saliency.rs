//! Gradient saliency: how strongly each input pixel pulls the
//! discriminator's output toward the "real" label.
//!
//! The upstream signal is the per-example gradient of the real-label
//! cross-entropy at the discriminator output, (p - 1) / (p (1 - p)), the
//! same quantity the generator trains against, so the explanation ranks
//! pixels by their leverage on the training loss itself.

use crate::error::{Error, Result};
use crate::loss::bce_elementwise;
use crate::network::Network;
use crate::tensor::Tensor;

/// Raw saliency attribution for a batch, shape of `x`.
///
/// Single-channel inputs keep the signed gradient. Multi-channel inputs
/// collapse to the per-pixel maximum gradient magnitude across channels,
/// broadcast back to every channel so the mask shape matches the input.
pub fn explain_saliency(d: &Network<f64>, x: &Tensor<f64>) -> Result<Tensor<f64>> {
    let trace = d.trace_eval(x)?;
    let p = trace.output();
    if p.rank() != 2 || p.dim(1) != 1 {
        return Err(Error::InvalidShape {
            shape: p.shape().to_vec(),
            message: "saliency expects a single-unit discriminator output".into(),
        });
    }
    let (_, upstream) = bce_elementwise(p, 1.0)?;
    let grad = d.backward_from_trace(&trace, &upstream)?;
    if !grad.all_finite() {
        return Err(Error::NonFinite { context: format!("saliency gradient through {}", d.name) });
    }
    collapse_channels(&grad)
}

/// Per-pixel max |g| across channels for rank-4 multi-channel tensors;
/// identity for single-channel or flat inputs.
fn collapse_channels(grad: &Tensor<f64>) -> Result<Tensor<f64>> {
    if grad.rank() != 4 || grad.dim(1) == 1 {
        return Ok(grad.clone());
    }
    let (n, c, h, w) = (grad.dim(0), grad.dim(1), grad.dim(2), grad.dim(3));
    let plane = h * w;
    let mut out = Tensor::zeros(vec![n, c, h, w]);
    let src = grad.data();
    let dst = out.data_mut();
    for e in 0..n {
        for p in 0..plane {
            let mut peak = 0.0f64;
            for ch in 0..c {
                peak = peak.max(src[(e * c + ch) * plane + p].abs());
            }
            for ch in 0..c {
                dst[(e * c + ch) * plane + p] = peak;
            }
        }
    }
    Ok(out)
}
