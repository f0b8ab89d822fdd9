//! Central-difference verification of analytic gradients.
//!
//! Every evaluation (analytic and both sides of each difference) runs the
//! network in `Phase::Frozen` with an rng reseeded to the same value, so
//! stochastic layers reproduce identical masks and the compared function
//! is genuinely deterministic in the parameters.

use crate::error::Result;
use crate::loss::LossGrad;
use crate::network::Network;
use crate::rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const FD_STEP: f64 = 1e-5;

/// Relative error with an absolute floor: tiny gradients compare in
/// absolute terms, everything else relatively. NaN maps to +inf so it can
/// never pass a threshold.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-8);
    let e = (analytic - numeric).abs() / denom;
    if e.is_nan() {
        f64::INFINITY
    } else {
        e
    }
}

#[derive(Debug, Clone)]
pub struct TensorCheck {
    pub name: String,
    pub checked: usize,
    /// Coordinates whose probe interval straddled a hinge or clamp; central
    /// differences are invalid there, so they are measured but not scored.
    pub skipped: usize,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub entries: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.entries.iter().map(|e| e.max_rel_err).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&TensorCheck> {
        self.entries
            .iter()
            .max_by(|a, b| a.max_rel_err.partial_cmp(&b.max_rel_err).unwrap_or(std::cmp::Ordering::Equal))
    }
}

/// Checks every trainable tensor of `net` against central differences of
/// `loss` composed with a frozen forward pass.
///
/// `samples_per_tensor` caps how many coordinates of each tensor are
/// perturbed (0 means all); sampled indices are drawn from a stream
/// derived from `seed`, independent of the forward rng.
///
/// Coordinates whose widest probe interval is corrupted by a hinge or
/// clamp are re-measured at narrower steps; only coordinates unresolvable
/// at every width are skipped (reported per tensor in [`TensorCheck`]).
/// Gradients below the cancellation noise of the difference quotient are
/// denominated against that noise scale instead of their own size.
pub fn gradient_check<T, F>(
    net: &mut Network<T>,
    input: &Tensor<T>,
    loss: &F,
    samples_per_tensor: usize,
    seed: u64,
) -> Result<GradCheckReport>
where
    T: Scalar,
    F: Fn(&Tensor<T>) -> Result<LossGrad<T>>,
{
    let eval = |net: &mut Network<T>| -> Result<LossGrad<T>> {
        let mut r = rng::rng_from(seed);
        let out = net.forward(input, crate::layers::Phase::Frozen, &mut r)?;
        loss(&out)
    };

    // Analytic pass: gradients stay on the layers, copy them out as f64.
    let lg = eval(net)?;
    net.backward(&lg.grad)?;
    let analytic: Vec<(String, Vec<f64>)> = net
        .params_with_grads_mut()
        .into_iter()
        .map(|(name, p)| {
            let g = p
                .grad
                .map(|g| g.data().iter().map(|v| v.as_f64()).collect())
                .unwrap_or_else(|| vec![0.0; p.value.len()]);
            (name, g)
        })
        .collect();

    // A coordinate is scored with the widest interval first and refined to
    // narrower ones only on disagreement. A hinge at distance d from the
    // base point corrupts every interval wider than d but drops out of the
    // narrower ones, so the minimum over steps converges to the true
    // derivative; a wrong analytic gradient disagrees at every width and
    // cannot be masked. Within each step, two validity guards apply:
    // gradients below the cancellation noise eps * |loss| / step are
    // denominated against that noise scale (1e5 margin, bounding pure-noise
    // error at 1e-5), and a second difference far above the smooth
    // f'' * step^2 scale marks a hinge straddling the interval itself.
    let f0 = lg.value.as_f64();
    let steps = [FD_STEP, FD_STEP / 8.0, FD_STEP / 64.0];

    let mut entries = Vec::with_capacity(analytic.len());
    for (ti, (name, grads)) in analytic.iter().enumerate() {
        let len = grads.len();
        let indices = sample_indices(len, samples_per_tensor, seed, ti as u64);
        let mut max_rel = 0.0f64;
        let mut skipped = 0usize;
        for &i in &indices {
            let mut best: Option<f64> = None;
            for &step in &steps {
                let h = T::cast(step);
                let original = {
                    let mut params = net.params_with_grads_mut();
                    let v = params[ti].1.value.data_mut();
                    let orig = v[i];
                    v[i] = orig + h;
                    orig
                };
                let up = eval(net)?.value.as_f64();
                {
                    let mut params = net.params_with_grads_mut();
                    params[ti].1.value.data_mut()[i] = original - h;
                }
                let down = eval(net)?.value.as_f64();
                {
                    let mut params = net.params_with_grads_mut();
                    params[ti].1.value.data_mut()[i] = original;
                }
                if (up + down - 2.0 * f0).abs() > 1e-3 * step * f0.abs().max(1.0) {
                    continue;
                }
                let numeric = (up - down) / (2.0 * step);
                let resolution = (1e5 * f64::EPSILON * f0.abs() / step).max(1e-8);
                let denom = grads[i].abs().max(numeric.abs()).max(resolution);
                let err = (grads[i] - numeric).abs() / denom;
                let err = if err.is_nan() { f64::INFINITY } else { err };
                best = Some(best.map_or(err, |b: f64| b.min(err)));
                if err < 2e-5 {
                    break;
                }
            }
            match best {
                Some(err) => max_rel = max_rel.max(err),
                None => skipped += 1,
            }
        }
        entries.push(TensorCheck {
            name: name.clone(),
            checked: indices.len() - skipped,
            skipped,
            max_rel_err: max_rel,
        });
    }
    Ok(GradCheckReport { entries })
}

/// Central-difference gradient of `f` with respect to `x`, one coordinate
/// at a time. Used to validate input-side gradients (explainer upstream,
/// augmentation chains) where the analytic path is `backward_from_trace`.
pub fn fd_input_gradient<T, F>(x: &Tensor<T>, f: &F) -> Result<Tensor<T>>
where
    T: Scalar,
    F: Fn(&Tensor<T>) -> Result<T>,
{
    let h = T::cast(FD_STEP);
    let mut grad = Tensor::zeros(x.shape().to_vec());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let up = f(&probe)?;
        probe.data_mut()[i] = orig - h;
        let down = f(&probe)?;
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (up - down) / (T::cast(2.0) * h);
    }
    Ok(grad)
}

/// Deterministic sample of distinct coordinates. `cap == 0` or a cap at or
/// above `len` checks everything; otherwise a Fisher-Yates prefix drawn
/// from a seed-and-tensor-specific stream.
fn sample_indices(len: usize, cap: usize, seed: u64, tensor_idx: u64) -> Vec<usize> {
    if cap == 0 || cap >= len {
        return (0..len).collect();
    }
    use rand::Rng;
    let mut r = rng::rng_from(rng::derive_seed(seed, 0x6763_0000 ^ tensor_idx));
    let mut pool: Vec<usize> = (0..len).collect();
    for k in 0..cap {
        let j = r.gen_range(k..len);
        pool.swap(k, j);
    }
    pool.truncate(cap);
    pool
}
