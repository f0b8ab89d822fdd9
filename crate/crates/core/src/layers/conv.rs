//! Direct (no im2col) 2-d convolution and transposed convolution with
//! zero padding. Output size law for convolution:
//! `out = floor((in + 2*pad - kernel) / stride) + 1`; the transpose maps
//! `out = (in - 1) * stride - 2*pad + kernel`.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot};
use crate::rng::fill_normal;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub fn conv_out_size(input: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = input + 2 * pad;
    if padded < kernel || stride == 0 {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

pub fn conv_transpose_out_size(input: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    let grown = (input - 1) * stride + kernel;
    if grown < 2 * pad {
        return None;
    }
    Some(grown - 2 * pad)
}

const INIT_STD: f64 = 0.02;

/// Half-open range of `out` indices with `out*stride + tap - pad` inside
/// `[0, limit)`. Hoisting this out of the spatial loops keeps them
/// branch-free.
fn valid_range(limit: usize, tap: usize, stride: usize, pad: usize, out_len: usize) -> (usize, usize) {
    let lo = if pad > tap { (pad - tap).div_ceil(stride) } else { 0 };
    let hi = if limit + pad > tap {
        ((limit - 1 + pad - tap) / stride + 1).min(out_len)
    } else {
        0
    };
    (lo, hi.max(lo))
}

/// Convolution; weight layout (out_ch, in_ch, k, k).
#[derive(Debug, Clone)]
pub struct Conv2d<T = f64> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub stride: usize,
    pub pad: usize,
    pub(crate) grad_weight: Option<Tensor<T>>,
    pub(crate) grad_bias: Option<Tensor<T>>,
    cache: Option<Tensor<T>>,
}

impl<T: Scalar> Conv2d<T> {
    pub fn new(in_ch: usize, out_ch: usize, kernel: usize, stride: usize, pad: usize, rng: &mut dyn RngCore) -> Self {
        let mut weight = Tensor::zeros(vec![out_ch, in_ch, kernel, kernel]);
        fill_normal(weight.data_mut(), 0.0, INIT_STD, rng);
        Conv2d {
            weight,
            bias: Tensor::zeros(vec![out_ch]),
            stride,
            pad,
            grad_weight: None,
            grad_bias: None,
            cache: None,
        }
    }

    pub fn from_parts(weight: Tensor<T>, bias: Tensor<T>, stride: usize, pad: usize) -> Result<Self> {
        if weight.rank() != 4 || bias.rank() != 1 || bias.dim(0) != weight.dim(0) {
            return Err(Error::shape("conv parts", weight.shape(), bias.shape()));
        }
        Ok(Conv2d { weight, bias, stride, pad, grad_weight: None, grad_bias: None, cache: None })
    }

    fn dims(&self, x: &Tensor<T>) -> Result<(usize, usize, usize, usize, usize, usize, usize)> {
        let (oc, ic, k) = (self.weight.dim(0), self.weight.dim(1), self.weight.dim(2));
        if x.rank() != 4 || x.dim(1) != ic {
            return Err(Error::shape("conv input", &[0, ic, 0, 0], x.shape()));
        }
        let (n, h, w) = (x.dim(0), x.dim(2), x.dim(3));
        let oh = conv_out_size(h, k, self.stride, self.pad);
        let ow = conv_out_size(w, k, self.stride, self.pad);
        match (oh, ow) {
            (Some(oh), Some(ow)) if oh > 0 && ow > 0 => Ok((n, ic, oc, k, h, oh, ow)),
            _ => Err(Error::InvalidShape {
                shape: x.shape().to_vec(),
                message: format!("conv kernel {k} stride {} pad {} produces empty output", self.stride, self.pad),
            }),
        }
    }

    pub fn forward_eval(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, ic, oc, k, h, oh, ow) = self.dims(x)?;
        let w_in = x.dim(3);
        let (s, pad) = (self.stride, self.pad);
        let mut out = Tensor::zeros(vec![n, oc, oh, ow]);
        let wt = self.weight.data();
        let xs = x.data();
        let bias = self.bias.data();
        let od = out.data_mut();
        for b in 0..n {
            for o in 0..oc {
                let obase = (b * oc + o) * (oh * ow);
                od[obase..obase + oh * ow].fill(bias[o]);
                for c in 0..ic {
                    let xbase = (b * ic + c) * (h * w_in);
                    let wbase = (o * ic + c) * (k * k);
                    for ky in 0..k {
                        let (oy_lo, oy_hi) = valid_range(h, ky, s, pad, oh);
                        for kx in 0..k {
                            let (ox_lo, ox_hi) = valid_range(w_in, kx, s, pad, ow);
                            if ox_lo >= ox_hi {
                                continue;
                            }
                            let wv = wt[wbase + ky * k + kx];
                            for oy in oy_lo..oy_hi {
                                let xrow = xbase + (oy * s + ky - pad) * w_in;
                                let orow = obase + oy * ow;
                                let ix0 = ox_lo * s + kx - pad;
                                if s == 1 {
                                    let xr = &xs[xrow + ix0..xrow + ix0 + (ox_hi - ox_lo)];
                                    axpy(wv, xr, &mut od[orow + ox_lo..orow + ox_hi]);
                                } else {
                                    let mut ix = xrow + ix0;
                                    for ox in ox_lo..ox_hi {
                                        od[orow + ox] += xs[ix] * wv;
                                        ix += s;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn forward_cached(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let out = self.forward_eval(x)?;
        self.cache = Some(x.clone());
        Ok(out)
    }

    pub fn input_gradient(&self, in_shape: &[usize], grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let (oc, ic, k) = (self.weight.dim(0), self.weight.dim(1), self.weight.dim(2));
        let (n, h, w_in) = (in_shape[0], in_shape[2], in_shape[3]);
        let (oh, ow) = (grad_out.dim(2), grad_out.dim(3));
        let (s, pad) = (self.stride, self.pad);
        let mut gin = Tensor::zeros(in_shape.to_vec());
        let wt = self.weight.data();
        let gd = grad_out.data();
        let gi = gin.data_mut();
        for b in 0..n {
            for o in 0..oc {
                let gbase = (b * oc + o) * (oh * ow);
                for c in 0..ic {
                    let ibase = (b * ic + c) * (h * w_in);
                    let wbase = (o * ic + c) * (k * k);
                    for ky in 0..k {
                        let (oy_lo, oy_hi) = valid_range(h, ky, s, pad, oh);
                        for kx in 0..k {
                            let (ox_lo, ox_hi) = valid_range(w_in, kx, s, pad, ow);
                            if ox_lo >= ox_hi {
                                continue;
                            }
                            let wv = wt[wbase + ky * k + kx];
                            for oy in oy_lo..oy_hi {
                                let irow = ibase + (oy * s + ky - pad) * w_in;
                                let grow = gbase + oy * ow;
                                let ix0 = ox_lo * s + kx - pad;
                                if s == 1 {
                                    let gr = &gd[grow + ox_lo..grow + ox_hi];
                                    axpy(wv, gr, &mut gi[irow + ix0..irow + ix0 + (ox_hi - ox_lo)]);
                                } else {
                                    let mut ix = irow + ix0;
                                    for ox in ox_lo..ox_hi {
                                        gi[ix] += gd[grow + ox] * wv;
                                        ix += s;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(gin)
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.cache.take().ok_or_else(|| Error::BackwardBeforeForward { layer: "conv2d".into() })?;
        let (n, ic, oc, k, h, oh, ow) = self.dims(&x)?;
        if grad_out.shape() != [n, oc, oh, ow] {
            return Err(Error::shape("conv grad", &[n, oc, oh, ow], grad_out.shape()));
        }
        let w_in = x.dim(3);
        let (s, pad) = (self.stride, self.pad);
        let mut gw = Tensor::zeros(self.weight.shape().to_vec());
        let mut gb = Tensor::zeros(vec![oc]);
        {
            let xs = x.data();
            let gd = grad_out.data();
            let gwd = gw.data_mut();
            let gbd = gb.data_mut();
            for b in 0..n {
                for o in 0..oc {
                    let gbase = (b * oc + o) * (oh * ow);
                    let mut bias_acc = T::zero();
                    for &g in &gd[gbase..gbase + oh * ow] {
                        bias_acc += g;
                    }
                    gbd[o] += bias_acc;
                    for c in 0..ic {
                        let xbase = (b * ic + c) * (h * w_in);
                        let wbase = (o * ic + c) * (k * k);
                        for ky in 0..k {
                            let (oy_lo, oy_hi) = valid_range(h, ky, s, pad, oh);
                            for kx in 0..k {
                                let (ox_lo, ox_hi) = valid_range(w_in, kx, s, pad, ow);
                                if ox_lo >= ox_hi {
                                    continue;
                                }
                                let mut acc = T::zero();
                                for oy in oy_lo..oy_hi {
                                    let xrow = xbase + (oy * s + ky - pad) * w_in;
                                    let grow = gbase + oy * ow;
                                    let ix0 = ox_lo * s + kx - pad;
                                    if s == 1 {
                                        let xr = &xs[xrow + ix0..xrow + ix0 + (ox_hi - ox_lo)];
                                        acc += dot(xr, &gd[grow + ox_lo..grow + ox_hi]);
                                    } else {
                                        let mut ix = xrow + ix0;
                                        for ox in ox_lo..ox_hi {
                                            acc += xs[ix] * gd[grow + ox];
                                            ix += s;
                                        }
                                    }
                                }
                                gwd[wbase + ky * k + kx] += acc;
                            }
                        }
                    }
                }
            }
        }
        let gin = self.input_gradient(x.shape(), grad_out)?;
        self.grad_weight = Some(gw);
        self.grad_bias = Some(gb);
        Ok(gin)
    }
}

/// Transposed convolution; weight layout (in_ch, out_ch, k, k).
#[derive(Debug, Clone)]
pub struct ConvTranspose2d<T = f64> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub stride: usize,
    pub pad: usize,
    pub(crate) grad_weight: Option<Tensor<T>>,
    pub(crate) grad_bias: Option<Tensor<T>>,
    cache: Option<Tensor<T>>,
}

impl<T: Scalar> ConvTranspose2d<T> {
    pub fn new(in_ch: usize, out_ch: usize, kernel: usize, stride: usize, pad: usize, rng: &mut dyn RngCore) -> Self {
        let mut weight = Tensor::zeros(vec![in_ch, out_ch, kernel, kernel]);
        fill_normal(weight.data_mut(), 0.0, INIT_STD, rng);
        ConvTranspose2d {
            weight,
            bias: Tensor::zeros(vec![out_ch]),
            stride,
            pad,
            grad_weight: None,
            grad_bias: None,
            cache: None,
        }
    }

    fn dims(&self, x: &Tensor<T>) -> Result<(usize, usize, usize, usize, usize, usize, usize, usize)> {
        let (ic, oc, k) = (self.weight.dim(0), self.weight.dim(1), self.weight.dim(2));
        if x.rank() != 4 || x.dim(1) != ic {
            return Err(Error::shape("conv_transpose input", &[0, ic, 0, 0], x.shape()));
        }
        let (n, h, w) = (x.dim(0), x.dim(2), x.dim(3));
        let oh = conv_transpose_out_size(h, k, self.stride, self.pad);
        let ow = conv_transpose_out_size(w, k, self.stride, self.pad);
        match (oh, ow) {
            (Some(oh), Some(ow)) if oh > 0 && ow > 0 => Ok((n, ic, oc, k, h, w, oh, ow)),
            _ => Err(Error::InvalidShape {
                shape: x.shape().to_vec(),
                message: "conv_transpose produces empty output".into(),
            }),
        }
    }

    pub fn forward_eval(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, ic, oc, k, h, w, oh, ow) = self.dims(x)?;
        let (s, pad) = (self.stride, self.pad);
        let mut out = Tensor::zeros(vec![n, oc, oh, ow]);
        {
            let od = out.data_mut();
            let xs = x.data();
            let wt = self.weight.data();
            let bias = self.bias.data();
            for b in 0..n {
                for o in 0..oc {
                    let obase = (b * oc + o) * (oh * ow);
                    od[obase..obase + oh * ow].fill(bias[o]);
                    for c in 0..ic {
                        let xbase = (b * ic + c) * (h * w);
                        let wbase = (c * oc + o) * (k * k);
                        for ky in 0..k {
                            let (iy_lo, iy_hi) = valid_range(oh, ky, s, pad, h);
                            for kx in 0..k {
                                let (ix_lo, ix_hi) = valid_range(ow, kx, s, pad, w);
                                if ix_lo >= ix_hi {
                                    continue;
                                }
                                let wv = wt[wbase + ky * k + kx];
                                for iy in iy_lo..iy_hi {
                                    let xrow = xbase + iy * w;
                                    let orow = obase + (iy * s + ky - pad) * ow;
                                    let ox0 = ix_lo * s + kx - pad;
                                    if s == 1 {
                                        let xr = &xs[xrow + ix_lo..xrow + ix_hi];
                                        axpy(wv, xr, &mut od[orow + ox0..orow + ox0 + (ix_hi - ix_lo)]);
                                    } else {
                                        let mut ox = orow + ox0;
                                        for ix in ix_lo..ix_hi {
                                            od[ox] += xs[xrow + ix] * wv;
                                            ox += s;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn forward_cached(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let out = self.forward_eval(x)?;
        self.cache = Some(x.clone());
        Ok(out)
    }

    pub fn input_gradient(&self, in_shape: &[usize], grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let (ic, oc, k) = (self.weight.dim(0), self.weight.dim(1), self.weight.dim(2));
        let (n, h, w) = (in_shape[0], in_shape[2], in_shape[3]);
        let (oh, ow) = (grad_out.dim(2), grad_out.dim(3));
        let (s, pad) = (self.stride, self.pad);
        let mut gin = Tensor::zeros(in_shape.to_vec());
        let gd = grad_out.data();
        let wt = self.weight.data();
        let gi = gin.data_mut();
        for b in 0..n {
            for c in 0..ic {
                let ibase = (b * ic + c) * (h * w);
                for o in 0..oc {
                    let gbase = (b * oc + o) * (oh * ow);
                    let wbase = (c * oc + o) * (k * k);
                    for ky in 0..k {
                        let (iy_lo, iy_hi) = valid_range(oh, ky, s, pad, h);
                        for kx in 0..k {
                            let (ix_lo, ix_hi) = valid_range(ow, kx, s, pad, w);
                            if ix_lo >= ix_hi {
                                continue;
                            }
                            let wv = wt[wbase + ky * k + kx];
                            for iy in iy_lo..iy_hi {
                                let irow = ibase + iy * w;
                                let grow = gbase + (iy * s + ky - pad) * ow;
                                let ox0 = ix_lo * s + kx - pad;
                                if s == 1 {
                                    let gr = &gd[grow + ox0..grow + ox0 + (ix_hi - ix_lo)];
                                    axpy(wv, gr, &mut gi[irow + ix_lo..irow + ix_hi]);
                                } else {
                                    let mut ox = grow + ox0;
                                    for ix in ix_lo..ix_hi {
                                        gi[irow + ix] += gd[ox] * wv;
                                        ox += s;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(gin)
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self
            .cache
            .take()
            .ok_or_else(|| Error::BackwardBeforeForward { layer: "conv_transpose2d".into() })?;
        let (n, ic, oc, k, h, w, oh, ow) = self.dims(&x)?;
        if grad_out.shape() != [n, oc, oh, ow] {
            return Err(Error::shape("conv_transpose grad", &[n, oc, oh, ow], grad_out.shape()));
        }
        let (s, pad) = (self.stride, self.pad);
        let mut gw = Tensor::zeros(self.weight.shape().to_vec());
        let mut gb = Tensor::zeros(vec![oc]);
        {
            let xs = x.data();
            let gd = grad_out.data();
            let gwd = gw.data_mut();
            let gbd = gb.data_mut();
            for b in 0..n {
                for c in 0..ic {
                    let xbase = (b * ic + c) * (h * w);
                    for o in 0..oc {
                        let gbase = (b * oc + o) * (oh * ow);
                        let wbase = (c * oc + o) * (k * k);
                        for ky in 0..k {
                            let (iy_lo, iy_hi) = valid_range(oh, ky, s, pad, h);
                            for kx in 0..k {
                                let (ix_lo, ix_hi) = valid_range(ow, kx, s, pad, w);
                                if ix_lo >= ix_hi {
                                    continue;
                                }
                                let mut acc = T::zero();
                                for iy in iy_lo..iy_hi {
                                    let xrow = xbase + iy * w;
                                    let grow = gbase + (iy * s + ky - pad) * ow;
                                    let ox0 = ix_lo * s + kx - pad;
                                    if s == 1 {
                                        let xr = &xs[xrow + ix_lo..xrow + ix_hi];
                                        acc += dot(xr, &gd[grow + ox0..grow + ox0 + (ix_hi - ix_lo)]);
                                    } else {
                                        let mut ox = grow + ox0;
                                        for ix in ix_lo..ix_hi {
                                            acc += xs[xrow + ix] * gd[ox];
                                            ox += s;
                                        }
                                    }
                                }
                                gwd[wbase + ky * k + kx] += acc;
                            }
                        }
                    }
                }
            }
            for b in 0..n {
                for o in 0..oc {
                    let base = (b * oc + o) * (oh * ow);
                    let mut acc = T::zero();
                    for &g in &gd[base..base + oh * ow] {
                        acc += g;
                    }
                    gbd[o] += acc;
                }
            }
        }
        let gin = self.input_gradient(x.shape(), grad_out)?;
        self.grad_weight = Some(gw);
        self.grad_bias = Some(gb);
        Ok(gin)
    }
}
