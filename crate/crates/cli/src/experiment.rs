//! Resolved run specifications, the run driver, and run comparison.
//!
//! A run directory always ends up with: `spec.json` (the resolved spec),
//! `metrics.csv` (streamed per epoch), `fid.json`, `timings.json`,
//! `classifier.json`, `checkpoint.bin` (rewritten atomically per epoch),
//! and at least one `samples-epoch-*.pgm`/`.ppm` grid.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use xgan_core::checkpoint::{load_classifier, save_classifier, save_gan};
use xgan_core::data::{load_cifar10, load_idx, sample_noise, synth_dataset, Dataset};
use xgan_core::error::{Error, Result};
use xgan_core::explain::ExplainerKind;
use xgan_core::image::{grid_extension, write_grid, GRID_COLS};
use xgan_core::metrics::{
    extract_features, frechet_distance, gaussian_stats, train_feature_classifier,
    FeatureClassifier, FidRecord, GaussianStats, Stopwatch,
};
use xgan_core::models::{GanPair, LENET_FEATURE_DIM, NOISE_DIM};
use xgan_core::rng::{rng_for, tags};
use xgan_core::tensor::Tensor;
use xgan_core::train::{train, Architecture, CsvSink, EpochRecord, TrainConfig};

/// Per-side cap on examples fed to the distribution distance; keeps the
/// per-epoch evaluation affordable at desk scale.
pub const FID_SAMPLE_CAP: usize = 2048;

pub const DEFAULT_EPOCHS: usize = 10;
pub const DEFAULT_CLASSIFIER_EPOCHS: usize = 12;
/// Independent of the run seed so every run of a dataset shares the cache.
pub const DEFAULT_CLASSIFIER_SEED: u64 = 7777;

/// Where the images come from. Externally tagged in JSON, e.g.
/// `{"idx": {"images": "train.idx", "labels": "labels.idx"}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSpec {
    Idx { images: String, labels: Option<String> },
    Cifar10 { files: Vec<String> },
    Synth { n: usize, seed: u64 },
}

pub fn load_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    match spec {
        DatasetSpec::Idx { images, labels } => {
            load_idx(Path::new(images), labels.as_deref().map(Path::new))
        }
        DatasetSpec::Cifar10 { files } => load_cifar10(files),
        DatasetSpec::Synth { n, seed } => synth_dataset(*n, *seed),
    }
}

fn check_dataset_files(spec: &DatasetSpec) -> Result<()> {
    let mut missing = Vec::new();
    match spec {
        DatasetSpec::Idx { images, labels } => {
            missing.extend([Some(images), labels.as_ref()].into_iter().flatten());
        }
        DatasetSpec::Cifar10 { files } => missing.extend(files.iter()),
        DatasetSpec::Synth { .. } => {}
    }
    for path in missing {
        if !Path::new(path).exists() {
            return Err(Error::Config(format!("dataset file {path} does not exist")));
        }
    }
    Ok(())
}

/// A fully resolved run: every default applied, every path checked.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub label: String,
    pub dataset: DatasetSpec,
    pub out_dir: PathBuf,
    pub train: TrainConfig,
    /// Score every k-th epoch (plus the last) against the reference stats.
    pub fid_cadence: usize,
    /// Dump a sample grid every k-th epoch (plus the last).
    pub image_cadence: usize,
    pub classifier_epochs: usize,
    pub classifier_seed: u64,
    /// Directory for reusable feature-classifier checkpoints; `None` trains
    /// fresh every run.
    pub classifier_cache: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.fid_cadence == 0 || self.image_cadence == 0 {
            return Err(Error::Config("cadences must be at least 1".into()));
        }
        if self.classifier_epochs == 0 {
            return Err(Error::Config("classifier_epochs must be at least 1".into()));
        }
        check_dataset_files(&self.dataset)
    }
}

/// The config file schema: flat keys, everything optional except the
/// dataset. Unknown keys are rejected by name.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    label: Option<String>,
    dataset: Option<DatasetSpec>,
    out_dir: Option<PathBuf>,
    architecture: Option<Architecture>,
    explainer: Option<ExplainerKind>,
    alpha: Option<f64>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    lr: Option<f64>,
    data_fraction: Option<f64>,
    seed: Option<u64>,
    diffaug: Option<bool>,
    xai_start_epoch: Option<usize>,
    fid_cadence: Option<usize>,
    image_cadence: Option<usize>,
    classifier_epochs: Option<usize>,
    classifier_seed: Option<u64>,
    classifier_cache: Option<PathBuf>,
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub explainer: Option<ExplainerKind>,
    pub alpha: Option<f64>,
    pub epochs: Option<usize>,
    pub data_fraction: Option<f64>,
    pub diffaug: bool,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Reads the JSON config, applies `overrides`, fills documented defaults,
/// and validates the result.
pub fn parse_config(path: &Path, overrides: &Overrides) -> Result<ExperimentSpec> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let raw: RawSpec = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("config {}: {e}", path.display())))?;

    let dataset = raw
        .dataset
        .ok_or_else(|| Error::Config(format!("config {} sets no dataset", path.display())))?;
    let out_dir = overrides
        .out
        .clone()
        .or(raw.out_dir)
        .ok_or_else(|| Error::Config("no output directory (config out_dir or --out)".into()))?;
    let label = raw.label.unwrap_or_else(|| {
        out_dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into())
    });

    let epochs = overrides.epochs.or(raw.epochs).unwrap_or(DEFAULT_EPOCHS);
    let mut train = TrainConfig::new(
        raw.architecture.unwrap_or(Architecture::Fc),
        epochs,
        overrides.seed.or(raw.seed).unwrap_or(0),
    );
    train.explainer = overrides.explainer.or(raw.explainer).unwrap_or(ExplainerKind::None);
    if let Some(alpha) = overrides.alpha.or(raw.alpha) {
        train.alpha = alpha;
    }
    if let Some(batch) = raw.batch_size {
        train.batch_size = batch;
    }
    if let Some(lr) = raw.lr {
        train.lr = lr;
    }
    if let Some(fraction) = overrides.data_fraction.or(raw.data_fraction) {
        train.data_fraction = fraction;
    }
    train.diffaug = overrides.diffaug || raw.diffaug.unwrap_or(false);
    train.xai_start_epoch = raw.xai_start_epoch;

    let spec = ExperimentSpec {
        label,
        dataset,
        out_dir,
        train,
        fid_cadence: raw.fid_cadence.unwrap_or(1),
        image_cadence: raw.image_cadence.unwrap_or(1),
        classifier_epochs: raw.classifier_epochs.unwrap_or(DEFAULT_CLASSIFIER_EPOCHS),
        classifier_seed: raw.classifier_seed.unwrap_or(DEFAULT_CLASSIFIER_SEED),
        classifier_cache: raw.classifier_cache,
    };
    spec.validate()?;
    Ok(spec)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub final_fid: f64,
    pub total_seconds: f64,
    pub classifier_accuracy: f64,
    pub classifier_warning: bool,
}

#[derive(Serialize, Deserialize)]
struct ClassifierReport {
    holdout_accuracy: f64,
    low_accuracy_warning: bool,
    from_cache: bool,
}

#[derive(Serialize, Deserialize)]
struct TimingsFile {
    sections: BTreeMap<String, f64>,
    total_seconds: f64,
}

fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

fn classifier_for(spec: &ExperimentSpec, data: &Dataset) -> Result<(FeatureClassifier, bool)> {
    let labels = data.labels.as_ref().ok_or_else(|| {
        Error::Config(format!("dataset {} has no labels; the feature space needs them", data.name))
    })?;
    let classes = (usize::from(*labels.iter().max().expect("non-empty")) + 1).max(2);
    let cache_path = spec.classifier_cache.as_ref().map(|dir| {
        dir.join(format!(
            "lenet-{}-n{}-c{}-k{}-e{}-s{}.bin",
            sanitize(&data.name),
            data.len(),
            data.channels(),
            classes,
            spec.classifier_epochs,
            spec.classifier_seed,
        ))
    });

    if let Some(path) = &cache_path {
        if path.exists() {
            let clf = load_classifier(path)?;
            if clf.model.channels == data.channels() && clf.model.num_classes == classes {
                return Ok((clf, true));
            }
        }
    }

    let clf = train_feature_classifier(data, spec.classifier_epochs, spec.classifier_seed)?;
    if let Some(path) = &cache_path {
        fs::create_dir_all(path.parent().expect("cache file has a parent"))?;
        save_classifier(path, &clf)?;
    }
    Ok((clf, false))
}

/// First `cap` examples in dataset order; the reference side of the score.
fn reference_stats(clf: &FeatureClassifier, data: &Dataset, cap: usize) -> Result<(GaussianStats, usize)> {
    let n = data.len().min(cap);
    let row = data.images.row_len();
    let mut shape = data.images.shape().to_vec();
    shape[0] = n;
    let images = Tensor::new(shape, data.images.data()[..n * row].to_vec())?;
    let features = extract_features(&clf.model, &images)?;
    Ok((gaussian_stats(&features)?, n))
}

fn generated_fid(
    clf: &FeatureClassifier,
    real: &GaussianStats,
    pair: &GanPair<f64>,
    z: &Tensor<f64>,
) -> Result<f64> {
    let images = pair.generator.forward_eval(z)?;
    let features = extract_features(&clf.model, &images)?;
    frechet_distance(real, &gaussian_stats(&features)?)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Format(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Executes one experiment end to end and fills the run directory.
pub fn run(spec: &ExperimentSpec) -> Result<RunSummary> {
    spec.validate()?;
    let out = &spec.out_dir;
    fs::create_dir_all(out)?;
    write_json(&out.join("spec.json"), spec)?;

    let data = load_dataset(&spec.dataset)?;
    let (clf, from_cache) = classifier_for(spec, &data)?;
    write_json(
        &out.join("classifier.json"),
        &ClassifierReport {
            holdout_accuracy: clf.holdout_accuracy,
            low_accuracy_warning: clf.low_accuracy_warning,
            from_cache,
        },
    )?;

    // Reference statistics come from the full dataset (before any training
    // subsampling), capped for tractability.
    let (real_stats, n_real) = reference_stats(&clf, &data, FID_SAMPLE_CAP)?;
    let n_gen = data.len().min(FID_SAMPLE_CAP);
    let z_eval = sample_noise::<f64>(n_gen, NOISE_DIM, &mut rng_for(spec.train.seed, tags::FID_EVAL))?;
    let z_grid =
        sample_noise::<f64>(GRID_COLS * GRID_COLS, NOISE_DIM, &mut rng_for(spec.train.seed, tags::GRID))?;

    let csv = fs::File::create(out.join("metrics.csv"))?;
    let mut sink = CsvSink::new(BufWriter::new(csv));
    let watch = Stopwatch::new();
    let mut fid_records: Vec<FidRecord> = Vec::new();
    let epochs = spec.train.epochs;
    let ext = grid_extension(data.channels());

    let mut on_epoch = |epoch: usize, pair: &GanPair<f64>| -> Result<Option<f64>> {
        let last = epoch + 1 == epochs;
        if epoch % spec.image_cadence == 0 || last {
            let images = pair.generator.forward_eval(&z_grid)?;
            write_grid(&out.join(format!("samples-epoch-{epoch:04}.{ext}")), &images, GRID_COLS)?;
        }
        let fid = if epoch % spec.fid_cadence == 0 || last {
            let fid = generated_fid(&clf, &real_stats, pair, &z_eval)?;
            fid_records.push(FidRecord {
                epoch,
                n_real,
                n_gen,
                fid,
                feature_dim: LENET_FEATURE_DIM,
            });
            Some(fid)
        } else {
            None
        };
        save_gan(&out.join("checkpoint.bin"), pair)?;
        Ok(fid)
    };

    let outcome = train(&spec.train, &data, &mut sink, &mut on_epoch, &watch)?;

    write_json(&out.join("fid.json"), &fid_records)?;
    let total_seconds: f64 = outcome.trace.records.iter().map(|r| r.seconds).sum();
    write_json(&out.join("timings.json"), &TimingsFile { sections: watch.totals(), total_seconds })?;

    let final_fid = fid_records.last().map(|r| r.fid).unwrap_or(f64::NAN);
    Ok(RunSummary {
        out_dir: out.clone(),
        final_fid,
        total_seconds,
        classifier_accuracy: clf.holdout_accuracy,
        classifier_warning: clf.low_accuracy_warning,
    })
}

/// Parses a `metrics.csv` written by [`run`] back into records.
pub fn parse_metrics(path: &Path) -> Result<Vec<EpochRecord>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{} is empty", path.display())))?;
    if header != xgan_core::train::CSV_HEADER {
        return Err(Error::Format(format!("{} has unexpected header {header:?}", path.display())));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Format(format!("{} row {i}: expected 6 fields", path.display())));
        }
        let bad = |what: &str| Error::Format(format!("{} row {i}: bad {what}", path.display()));
        out.push(EpochRecord {
            epoch: fields[0].parse().map_err(|_| bad("epoch"))?,
            d_loss: fields[1].parse().map_err(|_| bad("d_loss"))?,
            g_loss: fields[2].parse().map_err(|_| bad("g_loss"))?,
            fid: if fields[3].is_empty() {
                None
            } else {
                Some(fields[3].parse().map_err(|_| bad("fid"))?)
            },
            seconds: fields[4].parse().map_err(|_| bad("seconds"))?,
            xai_active: fields[5].parse().map_err(|_| bad("xai_active"))?,
        });
    }
    Ok(out)
}

struct RunReport {
    label: String,
    explainer: String,
    alpha: f64,
    final_fid: f64,
    total_seconds: f64,
    sections: BTreeMap<String, f64>,
}

fn read_run(dir: &Path) -> Result<RunReport> {
    let metrics_path = dir.join("metrics.csv");
    if !metrics_path.exists() {
        return Err(Error::Config(format!("run {} is missing metrics.csv", dir.display())));
    }
    let records = parse_metrics(&metrics_path)?;
    let final_fid = records
        .iter()
        .rev()
        .find_map(|r| r.fid)
        .ok_or_else(|| Error::Config(format!("run {} has no FID entries", dir.display())))?;
    let total_seconds = records.iter().map(|r| r.seconds).sum();

    let spec_text = fs::read_to_string(dir.join("spec.json"))
        .map_err(|_| Error::Config(format!("run {} is missing spec.json", dir.display())))?;
    let spec: ExperimentSpec = serde_json::from_str(&spec_text)
        .map_err(|e| Error::Format(format!("run {}: spec.json: {e}", dir.display())))?;

    let timings_text = fs::read_to_string(dir.join("timings.json"))
        .map_err(|_| Error::Config(format!("run {} is missing timings.json", dir.display())))?;
    let timings: TimingsFile = serde_json::from_str(&timings_text)
        .map_err(|e| Error::Format(format!("run {}: timings.json: {e}", dir.display())))?;

    Ok(RunReport {
        label: spec.label,
        explainer: spec.train.explainer.name().to_string(),
        alpha: spec.train.alpha,
        final_fid,
        total_seconds,
        sections: timings.sections,
    })
}

/// Side-by-side table over completed run directories, as CSV text. The
/// overhead ratio divides each run's wall-clock by the baseline's, where
/// the baseline is the first explainer-free run (else the first run).
pub fn compare(dirs: &[PathBuf]) -> Result<String> {
    if dirs.len() < 2 {
        return Err(Error::Config(format!("compare needs at least 2 runs, got {}", dirs.len())));
    }
    let reports = dirs.iter().map(|d| read_run(d)).collect::<Result<Vec<_>>>()?;
    let baseline = reports
        .iter()
        .position(|r| r.explainer == "none")
        .unwrap_or(0);
    let base_seconds = reports[baseline].total_seconds;

    let mut out = String::from(
        "label,explainer,alpha,final_fid,total_seconds,discriminator_seconds,generator_seconds,explain_seconds,fid_seconds,overhead_ratio\n",
    );
    for r in &reports {
        let sec = |k: &str| r.sections.get(k).copied().unwrap_or(0.0);
        out.push_str(&format!(
            "{},{},{},{:.6},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3}\n",
            r.label,
            r.explainer,
            r.alpha,
            r.final_fid,
            r.total_seconds,
            sec("discriminator"),
            sec("generator"),
            sec("explain"),
            sec("fid"),
            r.total_seconds / base_seconds,
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_config(dir: &Path, body: &str) -> PathBuf {
        let path = dir.join("config.json");
        fs::write(&path, body).unwrap();
        path
    }

    #[test]
    fn minimal_config_resolves_to_documented_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            r#"{"dataset": {"synth": {"n": 256, "seed": 1}}, "out_dir": "runs/a"}"#,
        );
        let spec = parse_config(&path, &Overrides::default()).unwrap();
        assert_eq!(spec.train.batch_size, 128);
        assert_eq!(spec.train.lr, 0.0002);
        assert_eq!(spec.train.alpha, 0.2);
        assert_eq!(spec.train.epochs, 10);
        assert_eq!(spec.train.xai_start(), 5);
        assert_eq!(spec.train.explainer, ExplainerKind::None);
        assert_eq!(spec.train.data_fraction, 1.0);
        assert!(!spec.train.diffaug);
        assert_eq!(spec.fid_cadence, 1);
        assert_eq!(spec.label, "a");
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            r#"{"dataset": {"synth": {"n": 64, "seed": 1}}, "out_dir": "x", "momentum": 0.9}"#,
        );
        let err = parse_config(&path, &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("momentum"), "{err}");
    }

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            r#"{"dataset": {"synth": {"n": 64, "seed": 1}}, "out_dir": "x",
                "explainer": "saliency", "alpha": 0.5, "epochs": 4, "seed": 9}"#,
        );
        let ov = Overrides {
            explainer: Some(ExplainerKind::Lime),
            alpha: Some(0.25),
            epochs: Some(6),
            data_fraction: Some(0.5),
            diffaug: true,
            seed: Some(11),
            out: Some(PathBuf::from("elsewhere")),
        };
        let spec = parse_config(&path, &ov).unwrap();
        assert_eq!(spec.train.explainer, ExplainerKind::Lime);
        assert_eq!(spec.train.alpha, 0.25);
        assert_eq!(spec.train.epochs, 6);
        assert_eq!(spec.train.data_fraction, 0.5);
        assert!(spec.train.diffaug);
        assert_eq!(spec.train.seed, 11);
        assert_eq!(spec.out_dir, PathBuf::from("elsewhere"));
    }

    #[test]
    fn out_of_range_alpha_is_a_named_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            r#"{"dataset": {"synth": {"n": 64, "seed": 1}}, "out_dir": "x"}"#,
        );
        let ov = Overrides { alpha: Some(-1.0), ..Default::default() };
        let err = parse_config(&path, &ov).unwrap_err();
        assert!(err.to_string().contains("alpha"), "{err}");
    }

    #[test]
    fn missing_dataset_files_fail_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            r#"{"dataset": {"idx": {"images": "/nonexistent/images.idx", "labels": null}},
                "out_dir": "x"}"#,
        );
        let err = parse_config(&path, &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/images.idx"), "{err}");
    }

    #[test]
    fn compare_rejects_fewer_than_two_runs_and_missing_metrics() {
        assert!(compare(&[PathBuf::from("only")]).is_err());
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        fs::create_dir_all(&a).unwrap();
        fs::create_dir_all(&b).unwrap();
        let err = compare(&[a.clone(), b]).unwrap_err();
        assert!(err.to_string().contains("metrics.csv"), "{err}");
        assert!(err.to_string().contains("a"), "{err}");
    }

    #[test]
    fn metrics_round_trip_through_the_parser() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        fs::write(
            &path,
            "epoch,d_loss,g_loss,fid,seconds,xai_active\n0,1.5,0.7,,0.5,false\n1,1.2,0.9,42.25,0.6,true\n",
        )
        .unwrap();
        let rows = parse_metrics(&path).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].fid, None);
        assert_eq!(rows[1].fid, Some(42.25));
        assert!(rows[1].xai_active);
    }
}
