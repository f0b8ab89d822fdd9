use std::path::PathBuf;

use clap::{Parser, Subcommand};

use xgan_cli::{compare, parse_config, run, Overrides};
use xgan_core::data::generate_synth_idx;
use xgan_core::error::Result;
use xgan_core::explain::ExplainerKind;
use xgan_core::metrics::ACCURACY_FLOOR;

#[derive(Parser)]
#[command(name = "xgan", version, about = "Adversarial training with explanation-guided generator updates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one experiment described by a JSON config, with overrides.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// none | saliency | lime | deepshap
        #[arg(long)]
        explainer: Option<String>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long = "data-fraction")]
        data_fraction: Option<f64>,
        /// Differentiable augmentation on all discriminator inputs.
        #[arg(long)]
        diffaug: bool,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides the config's out_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a CSV table comparing two or more completed run directories.
    Compare {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
    /// Write a labelled synthetic digit corpus as an IDX image/label pair.
    SynthData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, explainer, alpha, epochs, data_fraction, diffaug, seed, out } => {
            let explainer = explainer.as_deref().map(ExplainerKind::parse).transpose()?;
            let overrides =
                Overrides { explainer, alpha, epochs, data_fraction, diffaug, seed, out };
            let spec = parse_config(&config, &overrides)?;
            let summary = run(&spec)?;
            if summary.classifier_warning {
                eprintln!(
                    "warning: feature classifier holdout accuracy {:.3} is below {ACCURACY_FLOOR}; FID values may be unreliable",
                    summary.classifier_accuracy
                );
            }
            println!(
                "run {}: final FID {:.6} after {} epochs in {:.1}s -> {}",
                spec.label,
                summary.final_fid,
                spec.train.epochs,
                summary.total_seconds,
                summary.out_dir.display()
            );
        }
        Command::Compare { dirs } => {
            print!("{}", compare(&dirs)?);
        }
        Command::SynthData { out, n, seed } => {
            std::fs::create_dir_all(&out)?;
            let (images, labels) = generate_synth_idx(&out, n, seed)?;
            println!("wrote {} and {}", images.display(), labels.display());
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = execute(cli) {
        // Machine-readable error contract: one JSON object on stderr.
        eprintln!("{}", serde_json::json!({ "error": e.to_string(), "kind": e.kind() }));
        std::process::exit(1);
    }
}
