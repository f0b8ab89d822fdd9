//! Scalar losses with their gradients w.r.t. the prediction tensor.
//!
//! Probabilities are clamped to [1e-7, 1 - 1e-7] inside the cross-entropy
//! so a saturated discriminator yields large-but-finite losses and bounded
//! gradients.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct LossGrad<T> {
    pub value: T,
    pub grad: Tensor<T>,
}

fn clamp_prob<T: Scalar>(p: T) -> T {
    let lo = T::cast(PROB_CLAMP);
    let hi = T::one() - lo;
    p.max(lo).min(hi)
}

/// Per-element binary cross-entropy against a constant target label.
/// Returns elementwise losses and gradients (no batch reduction).
pub fn bce_elementwise<T: Scalar>(pred: &Tensor<T>, target: T) -> Result<(Tensor<T>, Tensor<T>)> {
    if !pred.all_finite() {
        return Err(Error::NonFinite { context: "bce prediction".into() });
    }
    let one = T::one();
    let losses = pred.map(|p| {
        let p = clamp_prob(p);
        -(target * p.ln() + (one - target) * (one - p).ln())
    });
    let grads = pred.map(|p| {
        let p = clamp_prob(p);
        (p - target) / (p * (one - p))
    });
    Ok((losses, grads))
}

/// Batch-mean binary cross-entropy against a constant target.
pub fn bce_mean<T: Scalar>(pred: &Tensor<T>, target: T) -> Result<LossGrad<T>> {
    let (losses, grads) = bce_elementwise(pred, target)?;
    let n = T::cast(losses.len() as f64);
    let value = losses.data().iter().copied().sum::<T>() / n;
    Ok(LossGrad { value, grad: grads.scale(T::one() / n) })
}

/// Mean binary cross-entropy with a per-element target tensor
/// (used when real and fake halves share one discriminator pass).
pub fn bce_mean_targets<T: Scalar>(pred: &Tensor<T>, targets: &Tensor<T>) -> Result<LossGrad<T>> {
    if pred.shape() != targets.shape() {
        return Err(Error::shape("bce targets", pred.shape(), targets.shape()));
    }
    if !pred.all_finite() {
        return Err(Error::NonFinite { context: "bce prediction".into() });
    }
    let one = T::one();
    let n = T::cast(pred.len() as f64);
    let mut value = T::zero();
    let mut grad = Tensor::zeros(pred.shape().to_vec());
    for (i, (&p, &y)) in pred.data().iter().zip(targets.data()).enumerate() {
        let p = clamp_prob(p);
        value += -(y * p.ln() + (one - y) * (one - p).ln());
        grad.data_mut()[i] = (p - y) / (p * (one - p)) / n;
    }
    Ok(LossGrad { value: value / n, grad })
}

/// Row-wise softmax with the max-subtraction trick.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    if logits.rank() != 2 {
        return Err(Error::shape("softmax logits", &[0, 0], logits.shape()));
    }
    let (n, k) = (logits.dim(0), logits.dim(1));
    let mut out = Tensor::zeros(vec![n, k]);
    for r in 0..n {
        let row = &logits.data()[r * k..(r + 1) * k];
        let m = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        let mut sum = T::zero();
        for c in 0..k {
            let e = (row[c] - m).exp();
            out.data_mut()[r * k + c] = e;
            sum += e;
        }
        for c in 0..k {
            out.data_mut()[r * k + c] /= sum;
        }
    }
    Ok(out)
}

/// Mean softmax cross-entropy over integer class labels.
/// Gradient w.r.t. logits is `(softmax - onehot) / n`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[u8]) -> Result<LossGrad<T>> {
    let (n, k) = (logits.dim(0), logits.dim(1));
    if labels.len() != n {
        return Err(Error::CountMismatch { images: n, labels: labels.len() });
    }
    if let Some(&bad) = labels.iter().find(|&&l| (l as usize) >= k) {
        return Err(Error::Config(format!("label {bad} out of range for {k} classes")));
    }
    let probs = softmax(logits)?;
    let inv_n = T::one() / T::cast(n as f64);
    let mut value = T::zero();
    let mut grad = probs.scale(inv_n);
    for r in 0..n {
        let c = labels[r] as usize;
        let p = clamp_prob(probs.data()[r * k + c]);
        value += -p.ln();
        grad.data_mut()[r * k + c] -= inv_n;
    }
    Ok(LossGrad { value: value * inv_n, grad })
}

/// 0.5 * sum of squared residuals; handy as a generic probe loss.
pub fn half_sum_squares<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<LossGrad<T>> {
    let diff = pred.sub(target)?;
    let value = diff.data().iter().map(|&d| d * d).sum::<T>() * T::cast(0.5);
    Ok(LossGrad { value, grad: diff })
}
