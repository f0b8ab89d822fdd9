//! Differentiable augmentation applied to both real and generated images
//! before the discriminator. Each op is linear in the pixels once its
//! random parameters are drawn, so the instance admits an exact adjoint
//! and generator gradients pass through unchanged in expectation.
//!
//! Parameters are drawn per example into an [`AugInstance`]; applying the
//! same instance to the real and fake halves of a step keeps the two
//! streams identically augmented, which is what makes the trick fair.
//!
//! Outputs are not re-clamped to [-1, 1]: brightness and contrast may push
//! pixels outside and clamping would zero gradients exactly where the
//! generator needs them.

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugOp {
    Color,
    Translation,
    Cutout,
}

impl AugOp {
    pub fn name(self) -> &'static str {
        match self {
            AugOp::Color => "color",
            AugOp::Translation => "translation",
            AugOp::Cutout => "cutout",
        }
    }
}

/// Ordered, duplicate-free list of ops. The conventional full policy is
/// "color,translation,cutout".
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AugPolicy {
    ops: Vec<AugOp>,
}

impl AugPolicy {
    pub fn none() -> Self {
        AugPolicy { ops: vec![] }
    }

    pub fn full() -> Self {
        AugPolicy { ops: vec![AugOp::Color, AugOp::Translation, AugOp::Cutout] }
    }

    /// Parses a comma-separated op list; empty input means no ops.
    pub fn parse(s: &str) -> Result<Self> {
        let mut ops = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let op = match part {
                "color" => AugOp::Color,
                "translation" => AugOp::Translation,
                "cutout" => AugOp::Cutout,
                other => return Err(Error::Config(format!("unknown augmentation op {other:?}"))),
            };
            if ops.contains(&op) {
                return Err(Error::Config(format!("augmentation op {:?} listed twice", op.name())));
            }
            ops.push(op);
        }
        Ok(AugPolicy { ops })
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn ops(&self) -> &[AugOp] {
        &self.ops
    }

    /// Draws one set of per-example parameters for a batch of the given
    /// geometry. Ops sample in policy order, examples in index order.
    pub fn sample(
        &self,
        batch: usize,
        shape: (usize, usize, usize),
        rng: &mut dyn RngCore,
    ) -> AugInstance {
        let (_, h, w) = shape;
        let ops = self
            .ops
            .iter()
            .map(|op| match op {
                AugOp::Color => {
                    let mut brightness = Vec::with_capacity(batch);
                    let mut saturation = Vec::with_capacity(batch);
                    let mut contrast = Vec::with_capacity(batch);
                    for _ in 0..batch {
                        brightness.push(rng.gen_range(-0.5..0.5));
                        saturation.push(rng.gen_range(0.0..2.0));
                        contrast.push(rng.gen_range(0.5..1.5));
                    }
                    OpInstance::Color { brightness, saturation, contrast }
                }
                AugOp::Translation => {
                    let (sy, sx) = ((h / 8) as i64, (w / 8) as i64);
                    let mut dy = Vec::with_capacity(batch);
                    let mut dx = Vec::with_capacity(batch);
                    for _ in 0..batch {
                        dy.push(rng.gen_range(-sy..=sy));
                        dx.push(rng.gen_range(-sx..=sx));
                    }
                    OpInstance::Translation { dy, dx }
                }
                AugOp::Cutout => {
                    let mut cy = Vec::with_capacity(batch);
                    let mut cx = Vec::with_capacity(batch);
                    for _ in 0..batch {
                        cy.push(rng.gen_range(0..h));
                        cx.push(rng.gen_range(0..w));
                    }
                    OpInstance::Cutout { cy, cx }
                }
            })
            .collect();
        AugInstance { ops, batch, shape }
    }
}

/// Concrete per-example parameters for one training step.
#[derive(Debug, Clone)]
pub struct AugInstance {
    pub ops: Vec<OpInstance>,
    pub batch: usize,
    pub shape: (usize, usize, usize),
}

#[derive(Debug, Clone)]
pub enum OpInstance {
    Color { brightness: Vec<f64>, saturation: Vec<f64>, contrast: Vec<f64> },
    Translation { dy: Vec<i64>, dx: Vec<i64> },
    Cutout { cy: Vec<usize>, cx: Vec<usize> },
}

impl AugInstance {
    pub fn identity(batch: usize, shape: (usize, usize, usize)) -> Self {
        AugInstance { ops: vec![], batch, shape }
    }

    fn check(&self, x: &Tensor<f64>) -> Result<()> {
        let (c, h, w) = self.shape;
        let expect = [self.batch, c, h, w];
        if x.shape() != expect {
            return Err(Error::shape("augmentation batch", &expect, x.shape()));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor<f64>) -> Result<Tensor<f64>> {
        self.check(x)?;
        let mut cur = x.clone();
        for op in &self.ops {
            cur = self.apply(op, &cur);
        }
        Ok(cur)
    }

    /// Adjoint of [`forward`]: ops run in reverse with transposed maps.
    /// Because every op is linear given the instance, this is the exact
    /// gradient, not an approximation.
    pub fn backward(&self, grad: &Tensor<f64>) -> Result<Tensor<f64>> {
        self.check(grad)?;
        let mut cur = grad.clone();
        for op in self.ops.iter().rev() {
            cur = self.adjoint(op, &cur);
        }
        Ok(cur)
    }

    fn apply(&self, op: &OpInstance, x: &Tensor<f64>) -> Tensor<f64> {
        let (c, h, w) = self.shape;
        let plane = h * w;
        let row = c * plane;
        let mut out = x.clone();
        match op {
            OpInstance::Color { brightness, saturation, contrast } => {
                let data = out.data_mut();
                for e in 0..self.batch {
                    let ex = &mut data[e * row..(e + 1) * row];
                    for v in ex.iter_mut() {
                        *v += brightness[e];
                    }
                    // Saturation: scale around the per-pixel channel mean.
                    let s = saturation[e];
                    for p in 0..plane {
                        let mut m = 0.0;
                        for ch in 0..c {
                            m += ex[ch * plane + p];
                        }
                        m /= c as f64;
                        for ch in 0..c {
                            let v = &mut ex[ch * plane + p];
                            *v = m + s * (*v - m);
                        }
                    }
                    // Contrast: scale around the whole-example mean.
                    let k = contrast[e];
                    let mu = ex.iter().sum::<f64>() / row as f64;
                    for v in ex.iter_mut() {
                        *v = mu + k * (*v - mu);
                    }
                }
            }
            OpInstance::Translation { dy, dx } => {
                let src = x.data();
                let data = out.data_mut();
                for e in 0..self.batch {
                    for ch in 0..c {
                        let base = e * row + ch * plane;
                        for oy in 0..h {
                            let iy = oy as i64 - dy[e];
                            for ox in 0..w {
                                let ix = ox as i64 - dx[e];
                                data[base + oy * w + ox] =
                                    if (0..h as i64).contains(&iy) && (0..w as i64).contains(&ix) {
                                        src[base + iy as usize * w + ix as usize]
                                    } else {
                                        0.0
                                    };
                            }
                        }
                    }
                }
            }
            OpInstance::Cutout { cy, cx } => {
                let side = h / 2;
                let data = out.data_mut();
                for e in 0..self.batch {
                    // Square centered at (cy, cx), clipped at the borders.
                    let y0 = cy[e].saturating_sub(side / 2);
                    let x0 = cx[e].saturating_sub(side / 2);
                    let y1 = (cy[e] + side - side / 2).min(h);
                    let x1 = (cx[e] + side - side / 2).min(w);
                    for ch in 0..c {
                        let base = e * row + ch * plane;
                        for y in y0..y1 {
                            for x in x0..x1 {
                                data[base + y * w + x] = 0.0;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn adjoint(&self, op: &OpInstance, g: &Tensor<f64>) -> Tensor<f64> {
        let (c, h, w) = self.shape;
        let plane = h * w;
        let row = c * plane;
        match op {
            OpInstance::Color { saturation, contrast, .. } => {
                // Brightness adjoint is the identity. Saturation and
                // contrast are self-adjoint-shaped affine maps: the adjoint
                // of v -> m + s(v - m) redistributes the mean term.
                let mut out = g.clone();
                let data = out.data_mut();
                for e in 0..self.batch {
                    let ex = &mut data[e * row..(e + 1) * row];
                    // Contrast came last in forward, so it goes first here.
                    let k = contrast[e];
                    let gsum = ex.iter().sum::<f64>() / row as f64;
                    for v in ex.iter_mut() {
                        *v = k * *v + (1.0 - k) * gsum;
                    }
                    let s = saturation[e];
                    for p in 0..plane {
                        let mut m = 0.0;
                        for ch in 0..c {
                            m += ex[ch * plane + p];
                        }
                        m /= c as f64;
                        for ch in 0..c {
                            let v = &mut ex[ch * plane + p];
                            *v = s * *v + (1.0 - s) * m;
                        }
                    }
                }
                out
            }
            OpInstance::Translation { dy, dx } => {
                // Transpose of a shift is the opposite shift.
                let flipped = OpInstance::Translation {
                    dy: dy.iter().map(|v| -v).collect(),
                    dx: dx.iter().map(|v| -v).collect(),
                };
                self.apply(&flipped, g)
            }
            OpInstance::Cutout { .. } => self.apply(op, g),
        }
    }
}
