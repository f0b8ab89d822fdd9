//! Library-level driver integration: small experiment matrices through
//! `run`, the comparison table, and checkpoint reload.

use std::fs;
use std::path::PathBuf;

use tempfile::tempdir;
use xgan_cli::{compare, run, DatasetSpec, ExperimentSpec};
use xgan_core::checkpoint::load_gan;
use xgan_core::data::sample_noise;
use xgan_core::models::build_fc_gan;
use xgan_core::rng::rng_from;
use xgan_core::explain::ExplainerKind;
use xgan_core::train::{Architecture, TrainConfig};
use xgan_core::Tensor64;

fn tiny_spec(out_dir: PathBuf, cache: PathBuf, explainer: ExplainerKind, fraction: f64) -> ExperimentSpec {
    ExperimentSpec {
        label: out_dir.file_name().unwrap().to_string_lossy().into_owned(),
        dataset: DatasetSpec::Synth { n: 64, seed: 11 },
        out_dir,
        train: TrainConfig {
            architecture: Architecture::Fc,
            explainer,
            alpha: 0.2,
            epochs: 2,
            batch_size: 16,
            lr: 0.0002,
            data_fraction: fraction,
            seed: 77,
            diffaug: false,
            xai_start_epoch: Some(1),
        },
        fid_cadence: 1,
        image_cadence: 2,
        classifier_epochs: 2,
        classifier_seed: 900,
        classifier_cache: Some(cache),
    }
}

#[test]
fn explainer_and_subsample_matrix_runs_and_compares() {
    let root = tempdir().unwrap();
    let cache = root.path().join("cache");
    fs::create_dir_all(&cache).unwrap();

    let cells = [
        ("full-none", ExplainerKind::None, 1.0),
        ("full-saliency", ExplainerKind::Saliency, 1.0),
        ("sub-none", ExplainerKind::None, 0.35),
        ("sub-saliency", ExplainerKind::Saliency, 0.35),
    ];
    let mut dirs = Vec::new();
    for (name, kind, fraction) in cells {
        let spec = tiny_spec(root.path().join(name), cache.clone(), kind, fraction);
        let summary = run(&spec).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(summary.final_fid.is_finite() && summary.final_fid >= 0.0);
        assert!(summary.total_seconds > 0.0);
        let metrics = fs::read_to_string(spec.out_dir.join("metrics.csv")).unwrap();
        assert_eq!(metrics.lines().count(), 3, "{name}: header plus two epochs");
        dirs.push(spec.out_dir);
    }

    // Subsampling changed the batches, so the loss path must differ.
    let first_row = |dir: &PathBuf| {
        fs::read_to_string(dir.join("metrics.csv")).unwrap().lines().nth(1).unwrap().to_string()
    };
    assert_ne!(first_row(&dirs[0]), first_row(&dirs[2]));

    let table = compare(&dirs).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(
        lines[0],
        "label,explainer,alpha,final_fid,total_seconds,discriminator_seconds,generator_seconds,explain_seconds,fid_seconds,overhead_ratio"
    );
    for row in &lines[1..] {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 10, "row {row}");
        assert!(fields[9].parse::<f64>().unwrap() > 0.0, "overhead in {row}");
    }
    // First no-explainer run anchors the overhead column at exactly one.
    let baseline: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(baseline[0], "full-none");
    assert_eq!(baseline[9], "1.000");
}

#[test]
fn checkpoint_reload_reproduces_generator_outputs() {
    let root = tempdir().unwrap();
    let cache = root.path().join("cache");
    fs::create_dir_all(&cache).unwrap();
    let spec = tiny_spec(root.path().join("ckpt"), cache, ExplainerKind::None, 1.0);
    run(&spec).unwrap();

    let path = spec.out_dir.join("checkpoint.bin");
    let mut restored = build_fc_gan::<f64>(&mut rng_from(1), &mut rng_from(2));
    load_gan(&path, &mut restored).unwrap();
    let z: Tensor64 = sample_noise(6, restored.noise_dim, &mut rng_from(3)).unwrap();
    let images = restored.generator.forward_eval(&z).unwrap();
    assert_eq!(images.shape(), [6, 1, 32, 32]);
    assert!(images.data().iter().all(|v| (-1.0..=1.0).contains(v)));

    // Loading into a differently initialized pair converges to the same state.
    let mut second = build_fc_gan::<f64>(&mut rng_from(8), &mut rng_from(9));
    load_gan(&path, &mut second).unwrap();
    let again = second.generator.forward_eval(&z).unwrap();
    let bits = |t: &Tensor64| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&images), bits(&again));
}
