//! LIME over square pixel patches: perturb the instance by switching
//! patches off (replaced by a baseline), query the discriminator, and fit
//! a locality-weighted linear model whose coefficients become the
//! per-patch attribution.

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::linalg::solve_psd;
use crate::network::Network;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct LimeOptions {
    /// Perturbations drawn (the first is always the unperturbed instance).
    pub n_samples: usize,
    /// Side of the square patches the image is segmented into.
    pub segment_size: usize,
    /// Width of the exponential locality kernel over cosine distance.
    pub kernel_width: f64,
    /// Replaces switched-off patches; defaults to zeros (mid-gray in the
    /// [-1,1] pixel contract). Shape (1, c, h, w).
    pub baseline: Option<Tensor<f64>>,
}

impl Default for LimeOptions {
    fn default() -> Self {
        LimeOptions { n_samples: 200, segment_size: 4, kernel_width: 0.25, baseline: None }
    }
}

#[derive(Debug, Clone)]
pub struct LimeResult {
    /// Per-segment coefficients broadcast to the pixel grid, shape of `x`.
    pub attribution: Tensor<f64>,
    /// Set when the weighted normal equations were singular and the
    /// least-norm solution was taken instead.
    pub rank_deficient: bool,
}

/// Explains a single example, shape (1, c, h, w).
pub fn explain_lime(
    d: &Network<f64>,
    x: &Tensor<f64>,
    opts: &LimeOptions,
    rng: &mut dyn RngCore,
) -> Result<LimeResult> {
    if x.rank() != 4 || x.dim(0) != 1 {
        return Err(Error::InvalidShape {
            shape: x.shape().to_vec(),
            message: "lime explains one (1, c, h, w) example at a time".into(),
        });
    }
    let (c, h, w) = (x.dim(1), x.dim(2), x.dim(3));
    let ss = opts.segment_size;
    if ss == 0 || h % ss != 0 || w % ss != 0 {
        return Err(Error::Config(format!(
            "segment size {ss} does not tile a {h}x{w} image"
        )));
    }
    let (sh, sw) = (h / ss, w / ss);
    let n_seg = sh * sw;
    if opts.n_samples < n_seg {
        return Err(Error::Config(format!(
            "{} samples cannot identify {n_seg} segments",
            opts.n_samples
        )));
    }
    let baseline = match &opts.baseline {
        Some(b) => {
            if b.shape() != [1, c, h, w] {
                return Err(Error::shape("lime baseline", &[1, c, h, w], b.shape()));
            }
            b.clone()
        }
        None => Tensor::zeros(vec![1, c, h, w]),
    };

    // Binary perturbation matrix; row 0 keeps every segment on.
    let n = opts.n_samples;
    let mut z = vec![1.0f64; n * n_seg];
    for row in 1..n {
        for s in 0..n_seg {
            z[row * n_seg + s] = if rng.gen::<f64>() < 0.5 { 1.0 } else { 0.0 };
        }
    }

    // Assemble all perturbed images and query the discriminator once.
    let mut batch = Tensor::zeros(vec![n, c, h, w]);
    {
        let dst = batch.data_mut();
        let src = x.data();
        let base = baseline.data();
        let plane = h * w;
        for row in 0..n {
            for s in 0..n_seg {
                let on = z[row * n_seg + s] == 1.0;
                let (py, px) = (s / sw, s % sw);
                for ch in 0..c {
                    for yy in py * ss..(py + 1) * ss {
                        for xx in px * ss..(px + 1) * ss {
                            let p = ch * plane + yy * w + xx;
                            dst[row * c * plane + p] = if on { src[p] } else { base[p] };
                        }
                    }
                }
            }
        }
    }
    let preds = d.forward_eval(&batch)?;
    if preds.len() != n {
        return Err(Error::shape("lime discriminator output", &[n, 1], preds.shape()));
    }

    // Locality weights: cosine distance to the all-ones vector. For a
    // binary row with k of n_seg segments on, cos = sqrt(k / n_seg); the
    // all-off row gets distance 1 by convention.
    let weights: Vec<f64> = (0..n)
        .map(|row| {
            let k: f64 = z[row * n_seg..(row + 1) * n_seg].iter().sum();
            let dist = if k == 0.0 { 1.0 } else { 1.0 - (k / n_seg as f64).sqrt() };
            (-(dist / opts.kernel_width).powi(2)).exp()
        })
        .collect();

    // Weighted least squares with intercept: features [1, z_1..z_nseg].
    let dim = n_seg + 1;
    let mut xtx = vec![0.0f64; dim * dim];
    let mut xty = vec![0.0f64; dim];
    let mut feat = vec![0.0f64; dim];
    for row in 0..n {
        feat[0] = 1.0;
        feat[1..].copy_from_slice(&z[row * n_seg..(row + 1) * n_seg]);
        let wgt = weights[row];
        let y = preds.data()[row];
        for i in 0..dim {
            let fi = feat[i] * wgt;
            xty[i] += fi * y;
            for j in i..dim {
                xtx[i * dim + j] += fi * feat[j];
            }
        }
    }
    for i in 0..dim {
        for j in 0..i {
            xtx[i * dim + j] = xtx[j * dim + i];
        }
    }
    let solution = solve_psd(&xtx, &xty, dim)?;

    // Broadcast segment coefficients (skipping the intercept) to pixels.
    let mut attribution = Tensor::zeros(vec![1, c, h, w]);
    {
        let dst = attribution.data_mut();
        let plane = h * w;
        for s in 0..n_seg {
            let coef = solution.x[s + 1];
            let (py, px) = (s / sw, s % sw);
            for ch in 0..c {
                for yy in py * ss..(py + 1) * ss {
                    for xx in px * ss..(px + 1) * ss {
                        dst[ch * plane + yy * w + xx] = coef;
                    }
                }
            }
        }
    }
    Ok(LimeResult { attribution, rank_deficient: solution.rank_deficient })
}
