//! Attribution masks: absolute value scaled so the strongest feature is 1.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExplainerKind {
    None,
    Saliency,
    Lime,
    Deepshap,
}

impl ExplainerKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ExplainerKind::None),
            "saliency" => Ok(ExplainerKind::Saliency),
            "lime" => Ok(ExplainerKind::Lime),
            "deepshap" => Ok(ExplainerKind::Deepshap),
            other => Err(Error::Config(format!(
                "unknown explainer {other:?} (expected none|saliency|lime|deepshap)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ExplainerKind::None => "none",
            ExplainerKind::Saliency => "saliency",
            ExplainerKind::Lime => "lime",
            ExplainerKind::Deepshap => "deepshap",
        }
    }
}

impl serde::Serialize for ExplainerKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> serde::Deserialize<'de> for ExplainerKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        ExplainerKind::parse(&raw).map_err(serde::de::Error::custom)
    }
}

impl std::fmt::Display for ExplainerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Normalized attribution for one example, values in [0, 1].
#[derive(Debug, Clone)]
pub struct ExplanationMask {
    pub values: Tensor<f64>,
    pub explainer_kind: ExplainerKind,
}

/// |raw| / max|raw|; an all-zero attribution stays all-zero, which makes
/// the downstream update a no-op rather than an error.
pub fn normalize_mask(raw: &Tensor<f64>) -> Result<Tensor<f64>> {
    if !raw.all_finite() {
        return Err(Error::NonFinite { context: "attribution normalization".into() });
    }
    let peak = raw.max_abs();
    if peak == 0.0 {
        return Ok(Tensor::zeros(raw.shape().to_vec()));
    }
    Ok(raw.map(|v| v.abs() / peak))
}

/// Per-example normalization over the leading dimension of a batched raw
/// attribution: each example is scaled by its own peak.
pub fn normalize_mask_batch(raw: &Tensor<f64>) -> Result<Tensor<f64>> {
    if raw.rank() < 2 {
        return Err(Error::InvalidShape {
            shape: raw.shape().to_vec(),
            message: "batched mask needs a leading example dimension".into(),
        });
    }
    if !raw.all_finite() {
        return Err(Error::NonFinite { context: "attribution normalization".into() });
    }
    let row = raw.row_len();
    let mut out = raw.clone();
    for e in 0..raw.dim(0) {
        let slice = &mut out.data_mut()[e * row..(e + 1) * row];
        let peak = slice.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak == 0.0 {
            slice.iter_mut().for_each(|v| *v = 0.0);
        } else {
            slice.iter_mut().for_each(|v| *v = v.abs() / peak);
        }
    }
    Ok(out)
}
