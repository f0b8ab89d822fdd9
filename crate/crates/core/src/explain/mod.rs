//! Feature attribution over a trained discriminator.
//!
//! Three explainers share one calling convention: given the network and a
//! batch of inputs, produce a per-example mask of the input's influence on
//! the "real" verdict, normalized to [0, 1] with per-example peak 1. The
//! mask later scales the gradient fed back into the generator.

pub mod deepshap;
pub mod lime;
pub mod mask;
pub mod saliency;

pub use deepshap::{
    explain_deepshap, explain_deepshap_batch, per_reference_contributions, ReferenceSet,
    DEFAULT_REFERENCES,
};
pub use lime::{explain_lime, LimeOptions, LimeResult};
pub use mask::{normalize_mask, normalize_mask_batch, ExplainerKind, ExplanationMask};
pub use saliency::explain_saliency;

use rand::RngCore;

use crate::error::Result;
use crate::network::Network;
use crate::tensor::Tensor;

/// A configured explainer ready to produce masks during training.
#[derive(Debug, Clone)]
pub enum Explainer {
    None,
    Saliency,
    Lime(LimeOptions),
    Deepshap(ReferenceSet),
}

impl Explainer {
    pub fn kind(&self) -> ExplainerKind {
        match self {
            Explainer::None => ExplainerKind::None,
            Explainer::Saliency => ExplainerKind::Saliency,
            Explainer::Lime(_) => ExplainerKind::Lime,
            Explainer::Deepshap(_) => ExplainerKind::Deepshap,
        }
    }

    /// Normalized masks for a batch, or `None` when explanation is off.
    /// `rng` is only consumed by the sampling-based explainer.
    pub fn masks_for_batch(
        &self,
        d: &Network<f64>,
        xs: &Tensor<f64>,
        rng: &mut dyn RngCore,
    ) -> Result<Option<Tensor<f64>>> {
        let raw = match self {
            Explainer::None => return Ok(None),
            Explainer::Saliency => explain_saliency(d, xs)?,
            Explainer::Lime(opts) => {
                let mut rows = Vec::with_capacity(xs.dim(0));
                for e in 0..xs.dim(0) {
                    let result = explain_lime(d, &xs.example(e)?.unsqueeze(), opts, rng)?;
                    rows.push(result.attribution.example(0)?);
                }
                Tensor::stack(&rows)?
            }
            Explainer::Deepshap(refs) => explain_deepshap_batch(d, xs, refs)?,
        };
        Ok(Some(normalize_mask_batch(&raw)?))
    }
}
