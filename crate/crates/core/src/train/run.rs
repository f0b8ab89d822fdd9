//! The full loop: one discriminator update then one generator update per
//! mini-batch, with guided generator updates switching on partway through.

use std::time::Instant;

use rand::seq::SliceRandom;

use crate::data::{sample_noise, subsample, Dataset};
use crate::error::{Error, Result};
use crate::explain::{Explainer, ExplainerKind, LimeOptions, ReferenceSet, DEFAULT_REFERENCES};
use crate::metrics::Stopwatch;
use crate::models::{build_dc_gan, build_fc_gan, GanPair};
use crate::optim::AdamState;
use crate::rng::{derive_seed, rng_for, tags};
use crate::augment::AugPolicy;
use crate::train::config::{Architecture, TrainConfig};
use crate::train::steps::{discriminator_step, generator_step};
use crate::train::trace::{EpochRecord, TrainTrace, TraceSink};

#[derive(Debug)]
pub struct TrainOutcome {
    pub pair: GanPair<f64>,
    pub trace: TrainTrace,
}

/// Per-epoch hook; returning `Some(v)` lands in the record's FID column.
/// Runs after the epoch's updates, on the state being recorded.
pub type EpochEval<'a> = dyn FnMut(usize, &GanPair<f64>) -> Result<Option<f64>> + 'a;

/// Hook for callers that never score epochs.
pub fn no_eval(_epoch: usize, _pair: &GanPair<f64>) -> Result<Option<f64>> {
    Ok(None)
}

/// Trains a fresh pair on `data` and returns it with the per-epoch trace.
///
/// Reproducibility contract: every stochastic choice (init, shuffling,
/// noise, dropout, augmentation, explanation sampling, subsampling) draws
/// from its own stream derived from `cfg.seed`, so equal configs give
/// bit-equal parameters and losses. Rows reach `sink` as epochs finish;
/// on a non-finite loss the run aborts with the completed rows delivered.
pub fn train(
    cfg: &TrainConfig,
    data: &Dataset,
    sink: &mut dyn TraceSink,
    epoch_eval: &mut EpochEval,
    watch: &Stopwatch,
) -> Result<TrainOutcome> {
    cfg.validate()?;

    let sub;
    let train_data = if cfg.data_fraction < 1.0 {
        sub = subsample(
            data,
            cfg.data_fraction,
            derive_seed(cfg.seed, tags::SUBSAMPLE),
            data.labels.is_some(),
        )?;
        &sub
    } else {
        data
    };
    let n = train_data.len();
    if n < cfg.batch_size {
        return Err(Error::Config(format!(
            "dataset holds {n} examples after subsampling, fewer than one batch of {}",
            cfg.batch_size
        )));
    }

    let shape = train_data.example_shape();
    let mut g_rng = rng_for(cfg.seed, tags::GENERATOR_INIT);
    let mut d_rng = rng_for(cfg.seed, tags::DISCRIMINATOR_INIT);
    let mut pair = match cfg.architecture {
        Architecture::Fc => build_fc_gan(&mut g_rng, &mut d_rng),
        Architecture::Dc => build_dc_gan(shape.0, &mut g_rng, &mut d_rng),
    };
    if shape != pair.image_shape {
        return Err(Error::Config(format!(
            "architecture {} generates {:?} images but the dataset holds {:?}",
            cfg.architecture, pair.image_shape, shape
        )));
    }

    let explainer = match cfg.explainer {
        ExplainerKind::None => Explainer::None,
        ExplainerKind::Saliency => Explainer::Saliency,
        ExplainerKind::Lime => Explainer::Lime(LimeOptions::default()),
        ExplainerKind::Deepshap => {
            let mut r = rng_for(cfg.seed, tags::REFERENCES);
            let count = DEFAULT_REFERENCES.min(n);
            Explainer::Deepshap(ReferenceSet::from_dataset(train_data, count, &mut r)?)
        }
    };
    let policy = if cfg.diffaug { AugPolicy::full() } else { AugPolicy::none() };

    let mut adam_g = AdamState::for_network(&pair.generator, cfg.lr);
    let mut adam_d = AdamState::for_network(&pair.discriminator, cfg.lr);
    let mut shuffle_rng = rng_for(cfg.seed, tags::SHUFFLE);
    let mut noise_rng = rng_for(cfg.seed, tags::NOISE);
    let mut step_rng = rng_for(cfg.seed, tags::DROPOUT_AND_AUG);
    let mut explain_rng = rng_for(cfg.seed, tags::EXPLAIN);

    let xai_start = cfg.xai_start();
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = TrainTrace::default();

    for epoch in 0..cfg.epochs {
        let epoch_started = Instant::now();
        order.shuffle(&mut shuffle_rng);
        let use_xai = epoch >= xai_start && cfg.explainer != ExplainerKind::None;

        let mut d_sum = 0.0;
        let mut g_sum = 0.0;
        let mut batches = 0usize;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let m = chunk.len();
            let real = train_data.select(chunk)?;

            let z = sample_noise(m, pair.noise_dim, &mut noise_rng)?;
            let inst = (!policy.is_empty())
                .then(|| policy.sample(m, pair.image_shape, &mut step_rng));
            let started = Instant::now();
            let d_loss =
                discriminator_step(&mut pair, &real, &z, &mut adam_d, inst.as_ref(), &mut step_rng)?;
            watch.add("discriminator", started.elapsed().as_secs_f64());

            let z = sample_noise(m, pair.noise_dim, &mut noise_rng)?;
            let inst = (!policy.is_empty())
                .then(|| policy.sample(m, pair.image_shape, &mut step_rng));
            let started = Instant::now();
            let stats = generator_step(
                &mut pair,
                &z,
                use_xai,
                cfg.alpha,
                &explainer,
                &mut adam_g,
                inst.as_ref(),
                &mut step_rng,
                &mut explain_rng,
            )?;
            watch.add("generator", (started.elapsed().as_secs_f64() - stats.explain_seconds).max(0.0));
            watch.add("explain", stats.explain_seconds);

            if !d_loss.is_finite() || !stats.g_loss.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("training loss at epoch {epoch}, batch {b}"),
                });
            }
            d_sum += d_loss;
            g_sum += stats.g_loss;
            batches += 1;
        }

        let started = Instant::now();
        let fid = epoch_eval(epoch, &pair)?;
        watch.add("fid", started.elapsed().as_secs_f64());

        let record = EpochRecord {
            epoch,
            d_loss: d_sum / batches as f64,
            g_loss: g_sum / batches as f64,
            fid,
            seconds: epoch_started.elapsed().as_secs_f64().max(1e-9),
            xai_active: use_xai,
        };
        sink.record(&record)?;
        trace.records.push(record);
    }

    Ok(TrainOutcome { pair, trace })
}
