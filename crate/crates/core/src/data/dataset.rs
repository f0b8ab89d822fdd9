//! In-memory image dataset in the network's input contract: float images
//! shaped (n, c, h, w) scaled to [-1, 1], optional class labels.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct Dataset {
    pub images: Tensor<f64>,
    pub labels: Option<Vec<u8>>,
    pub name: String,
}

impl Dataset {
    pub fn new(images: Tensor<f64>, labels: Option<Vec<u8>>, name: impl Into<String>) -> Result<Self> {
        if images.rank() != 4 {
            return Err(Error::InvalidShape {
                shape: images.shape().to_vec(),
                message: "dataset images must be (n, c, h, w)".into(),
            });
        }
        if images.dim(0) == 0 {
            return Err(Error::InvalidShape {
                shape: images.shape().to_vec(),
                message: "dataset needs at least one example".into(),
            });
        }
        if let Some(l) = &labels {
            if l.len() != images.dim(0) {
                return Err(Error::CountMismatch { images: images.dim(0), labels: l.len() });
            }
        }
        let (lo, hi) = images
            .data()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if lo < -1.0 - 1e-9 || hi > 1.0 + 1e-9 {
            return Err(Error::Numerical(format!("dataset pixels outside [-1,1]: range [{lo}, {hi}]")));
        }
        Ok(Dataset { images, labels, name: name.into() })
    }

    pub fn len(&self) -> usize {
        self.images.dim(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// (channels, height, width) of one example.
    pub fn example_shape(&self) -> (usize, usize, usize) {
        (self.images.dim(1), self.images.dim(2), self.images.dim(3))
    }

    pub fn channels(&self) -> usize {
        self.images.dim(1)
    }

    /// Rows of `images` selected by `indices`, stacked in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Tensor<f64>> {
        let rows: Vec<Tensor<f64>> = indices.iter().map(|&i| self.images.example(i)).collect::<Result<_>>()?;
        Tensor::stack(&rows)
    }

    /// Per-pixel mean over the whole dataset, shape (1, c, h, w). Serves
    /// as the "feature removed" baseline for occlusion-style explainers.
    pub fn mean_image(&self) -> Tensor<f64> {
        let n = self.len();
        let row = self.images.row_len();
        let mut acc = vec![0.0f64; row];
        for e in 0..n {
            let start = e * row;
            for (a, v) in acc.iter_mut().zip(&self.images.data()[start..start + row]) {
                *a += v;
            }
        }
        for a in &mut acc {
            *a /= n as f64;
        }
        let (c, h, w) = self.example_shape();
        Tensor::new(vec![1, c, h, w], acc).expect("row length matches example shape")
    }
}

/// Draws floor(fraction * n) examples without replacement, deterministic
/// in `seed`. Selected indices are emitted in ascending order, so the full
/// fraction is the identity. With `balanced` set, the quota applies per
/// class instead (floor(fraction * count_c) each, requires labels).
pub fn subsample(data: &Dataset, fraction: f64, seed: u64, balanced: bool) -> Result<Dataset> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!("subsample fraction {fraction} outside (0, 1]")));
    }
    if fraction == 1.0 {
        return Ok(data.clone());
    }
    let indices = if balanced {
        let labels = data
            .labels
            .as_ref()
            .ok_or_else(|| Error::Config("balanced subsample needs labels".into()))?;
        let mut by_class: std::collections::BTreeMap<u8, Vec<usize>> = Default::default();
        for (i, &l) in labels.iter().enumerate() {
            by_class.entry(l).or_default().push(i);
        }
        let mut picked = Vec::new();
        for (class, members) in by_class {
            let k = (fraction * members.len() as f64).floor() as usize;
            let mut r = rng::rng_from(rng::derive_seed(seed, u64::from(class)));
            picked.extend(choose_k(&members, k, &mut r));
        }
        picked
    } else {
        let k = (fraction * data.len() as f64).floor() as usize;
        let all: Vec<usize> = (0..data.len()).collect();
        let mut r = rng::rng_from(seed);
        choose_k(&all, k, &mut r)
    };
    let mut indices = indices;
    indices.sort_unstable();
    if indices.is_empty() {
        return Err(Error::Config(format!(
            "subsample of {} examples at fraction {fraction} selects nothing",
            data.len()
        )));
    }
    let images = data.select(&indices)?;
    let labels = data
        .labels
        .as_ref()
        .map(|l| indices.iter().map(|&i| l[i]).collect());
    Dataset::new(images, labels, data.name.clone())
}

fn choose_k(pool: &[usize], k: usize, r: &mut impl Rng) -> Vec<usize> {
    let mut pool = pool.to_vec();
    let k = k.min(pool.len());
    for i in 0..k {
        let j = r.gen_range(i..pool.len());
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}

/// Bilinear resize of an (n, c, h, w) batch using the pixel-center
/// convention, so constant images stay constant and the result needs no
/// re-clamping beyond float round-off.
pub fn bilinear_resize(images: &Tensor<f64>, new_h: usize, new_w: usize) -> Result<Tensor<f64>> {
    if images.rank() != 4 {
        return Err(Error::InvalidShape {
            shape: images.shape().to_vec(),
            message: "resize expects (n, c, h, w)".into(),
        });
    }
    let (n, c, h, w) = (images.dim(0), images.dim(1), images.dim(2), images.dim(3));
    if (h, w) == (new_h, new_w) {
        return Ok(images.clone());
    }
    let mut out = Tensor::zeros(vec![n, c, new_h, new_w]);
    let sy = h as f64 / new_h as f64;
    let sx = w as f64 / new_w as f64;
    let src = images.data();
    let dst = out.data_mut();
    for e in 0..n {
        for ch in 0..c {
            let plane = (e * c + ch) * h * w;
            let out_plane = (e * c + ch) * new_h * new_w;
            for oy in 0..new_h {
                let fy = ((oy as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
                let y0 = fy.floor() as usize;
                let y1 = (y0 + 1).min(h - 1);
                let wy = fy - y0 as f64;
                for ox in 0..new_w {
                    let fx = ((ox as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
                    let x0 = fx.floor() as usize;
                    let x1 = (x0 + 1).min(w - 1);
                    let wx = fx - x0 as f64;
                    let v00 = src[plane + y0 * w + x0];
                    let v01 = src[plane + y0 * w + x1];
                    let v10 = src[plane + y1 * w + x0];
                    let v11 = src[plane + y1 * w + x1];
                    let top = v00 + (v01 - v00) * wx;
                    let bot = v10 + (v11 - v10) * wx;
                    dst[out_plane + oy * new_w + ox] = top + (bot - top) * wy;
                }
            }
        }
    }
    Ok(out)
}

/// Affine map from byte pixels to the tanh range: 0 -> -1, 255 -> +1.
pub fn byte_to_signed(p: u8) -> f64 {
    f64::from(p) / 255.0 * 2.0 - 1.0
}

/// Inverse of [`byte_to_signed`] with clamping and round-to-nearest.
pub fn signed_to_byte(v: f64) -> u8 {
    (((v + 1.0) / 2.0 * 255.0).round().clamp(0.0, 255.0)) as u8
}
